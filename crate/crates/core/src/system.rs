//! Assembled port-Hamiltonian systems, trajectories and pointwise residuals.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dirac::{BondVector, DiracKernelRep, Dims, ValidationReport, DEFAULT_TOL};
use crate::energy::{Hamiltonian, ResistiveRelation, ResistiveReport};
use crate::error::{dim_err, PhsError, Result};
use crate::linalg;

/// Which half of an external port channel is prescribed as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Causality {
    /// The effort `e_P` is given; the flow `f_P` is solved for.
    Effort,
    /// The flow `f_P` is given; the effort `e_P` is solved for.
    Flow,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssemblyReport {
    pub tolerance: f64,
    pub dirac: ValidationReport,
    pub resistive: ResistiveReport,
}

#[derive(Debug, Clone)]
pub struct PhsSystem {
    dirac: DiracKernelRep,
    ham: Hamiltonian,
    res: ResistiveRelation,
    causality: Vec<Causality>,
    report: AssemblyReport,
}

/// Dimension and validation checks that do not depend on passing.
pub fn check_components(
    dirac: &DiracKernelRep,
    ham: &Hamiltonian,
    res: &ResistiveRelation,
    causality: &[Causality],
    tol: f64,
) -> Result<AssemblyReport> {
    let dims = dirac.dims();
    if ham.dim() != dims.n_s {
        return Err(dim_err(format!("Hamiltonian acts on {} states, structure has n_s = {}", ham.dim(), dims.n_s)));
    }
    if res.dim() != dims.n_r {
        return Err(dim_err(format!("resistive relation has n_r = {}, structure has {}", res.dim(), dims.n_r)));
    }
    if causality.len() != dims.n_p {
        return Err(dim_err(format!("{} causality entries for n_p = {}", causality.len(), dims.n_p)));
    }
    Ok(AssemblyReport {
        tolerance: tol,
        dirac: dirac.validate(tol),
        resistive: res.check(tol)?,
    })
}

pub fn assemble(
    dirac: DiracKernelRep,
    ham: impl Into<Hamiltonian>,
    res: ResistiveRelation,
    causality: Vec<Causality>,
) -> Result<PhsSystem> {
    PhsSystem::assemble_with_tol(dirac, ham.into(), res, causality, DEFAULT_TOL)
}

impl PhsSystem {
    pub fn assemble_with_tol(
        dirac: DiracKernelRep,
        ham: Hamiltonian,
        res: ResistiveRelation,
        causality: Vec<Causality>,
        tol: f64,
    ) -> Result<Self> {
        let report = check_components(&dirac, &ham, &res, &causality, tol)?;
        if !report.dirac.passed {
            return Err(PhsError::Validation(format!(
                "not a Dirac structure: rank {} (expected {}), skew defect {:.3e}",
                report.dirac.rank, report.dirac.expected_rank, report.dirac.skew_defect
            )));
        }
        if !report.resistive.passed {
            return Err(PhsError::Validation(format!(
                "resistive relation is not passive (eigenvalues in [{:.3e}, {:.3e}])",
                report.resistive.min_eigenvalue, report.resistive.max_eigenvalue
            )));
        }
        Ok(Self {
            dirac,
            ham,
            res,
            causality,
            report,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dirac.dims()
    }
    pub fn dirac(&self) -> &DiracKernelRep {
        &self.dirac
    }
    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }
    pub fn resistive(&self) -> &ResistiveRelation {
        &self.res
    }
    pub fn causality(&self) -> &[Causality] {
        &self.causality
    }
    pub fn report(&self) -> &AssemblyReport {
        &self.report
    }

    /// The bond vector `((−ẋ, f_R, f_P), (e, e_R, e_P))` for a given co-energy `e`.
    pub fn bond(
        &self,
        xdot: &DVector<f64>,
        coenergy: &DVector<f64>,
        f_r: &DVector<f64>,
        e_r: &DVector<f64>,
        f_p: &DVector<f64>,
        e_p: &DVector<f64>,
    ) -> Result<BondVector> {
        let d = self.dims();
        if xdot.len() != d.n_s || coenergy.len() != d.n_s {
            return Err(dim_err("state-rate or co-energy length does not match n_s"));
        }
        if f_r.len() != d.n_r || e_r.len() != d.n_r {
            return Err(dim_err("resistive data length does not match n_r"));
        }
        if f_p.len() != d.n_p || e_p.len() != d.n_p {
            return Err(dim_err("port data length does not match n_p"));
        }
        let minus_xdot = -xdot;
        BondVector::from_blocks([&minus_xdot, f_r, f_p], [coenergy, e_r, e_p])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongResidual {
    pub dirac_defect: f64,
    pub resistive_defect: f64,
}

/// Pointwise residual of the inclusion with co-energy `∇H(x)`.
pub fn strong_residual(
    sys: &PhsSystem,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    f_r: &DVector<f64>,
    e_r: &DVector<f64>,
    f_p: &DVector<f64>,
    e_p: &DVector<f64>,
) -> Result<StrongResidual> {
    let grad = sys.ham.grad(x)?;
    strong_residual_with_coenergy(sys, x, xdot, &grad, f_r, e_r, f_p, e_p)
}

/// As [`strong_residual`] with an explicitly supplied co-energy vector.
#[allow(clippy::too_many_arguments)]
pub fn strong_residual_with_coenergy(
    sys: &PhsSystem,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    coenergy: &DVector<f64>,
    f_r: &DVector<f64>,
    e_r: &DVector<f64>,
    f_p: &DVector<f64>,
    e_p: &DVector<f64>,
) -> Result<StrongResidual> {
    let bond = sys.bond(xdot, coenergy, f_r, e_r, f_p, e_p)?;
    Ok(StrongResidual {
        dirac_defect: sys.dirac.apply(&bond.f, &bond.e).norm(),
        resistive_defect: sys.res.residual(x, f_r, e_r)?,
    })
}

/// Sampled trajectory on a uniform grid: states at the `M + 1` nodes and
/// resistive/port data as one value per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub f_r: Vec<DVector<f64>>,
    pub e_r: Vec<DVector<f64>>,
    pub f_p: Vec<DVector<f64>>,
    pub e_p: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(
        t: Vec<f64>,
        x: Vec<DVector<f64>>,
        f_r: Vec<DVector<f64>>,
        e_r: Vec<DVector<f64>>,
        f_p: Vec<DVector<f64>>,
        e_p: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let traj = Self { t, x, f_r, e_r, f_p, e_p };
        traj.check_grid()?;
        traj.check_shapes()?;
        Ok(traj)
    }

    fn check_grid(&self) -> Result<()> {
        let m = self.t.len();
        if m < 2 {
            return Err(dim_err("trajectory needs at least two grid points"));
        }
        let dt = self.dt();
        if !(dt > 0.0) {
            return Err(PhsError::InvalidArgument("time grid must be strictly increasing".into()));
        }
        for (k, &tk) in self.t.iter().enumerate() {
            let expect = self.t[0] + k as f64 * dt;
            // 1e-12·dt plus the roundoff of forming t0 + k·dt
            let slack = 1e-12 * dt + 4.0 * f64::EPSILON * tk.abs().max(expect.abs());
            if (tk - expect).abs() > slack {
                return Err(PhsError::InvalidArgument(format!("time grid not uniform at index {k}")));
            }
        }
        Ok(())
    }

    fn check_shapes(&self) -> Result<()> {
        let steps = self.steps();
        if self.x.len() != steps + 1 {
            return Err(dim_err(format!("{} states for {} grid points", self.x.len(), steps + 1)));
        }
        for (name, v) in [("f_R", &self.f_r), ("e_R", &self.e_r), ("f_P", &self.f_p), ("e_P", &self.e_p)] {
            if v.len() != steps {
                return Err(dim_err(format!("{name} has {} samples for {steps} intervals", v.len())));
            }
        }
        let widths = |v: &Vec<DVector<f64>>| v.first().map(|s| s.len());
        for (name, v) in [
            ("x", &self.x),
            ("f_R", &self.f_r),
            ("e_R", &self.e_r),
            ("f_P", &self.f_p),
            ("e_P", &self.e_p),
        ] {
            let w = widths(v).unwrap_or(0);
            if v.iter().any(|s| s.len() != w) {
                return Err(dim_err(format!("{name} samples have inconsistent lengths")));
            }
        }
        if widths(&self.f_r) != widths(&self.e_r) || widths(&self.f_p) != widths(&self.e_p) {
            return Err(dim_err("flow and effort samples differ in width"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    pub fn dt(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / self.steps() as f64
    }

    pub fn dims(&self) -> Dims {
        Dims::new(
            self.x[0].len(),
            self.f_r.first().map_or(0, |v| v.len()),
            self.f_p.first().map_or(0, |v| v.len()),
        )
    }

    /// Errors unless the sample widths agree with `dims`.
    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        let own = self.dims();
        // with zero intervals the resistive/port widths are unknowable
        if own.n_s != dims.n_s || (self.steps() > 0 && (own.n_r != dims.n_r || own.n_p != dims.n_p)) {
            return Err(dim_err(format!(
                "trajectory has (n_s, n_r, n_p) = ({}, {}, {}), system has ({}, {}, {})",
                own.n_s, own.n_r, own.n_p, dims.n_s, dims.n_r, dims.n_p
            )));
        }
        Ok(())
    }

    /// Largest magnitude over all sampled channels.
    pub fn max_magnitude(&self) -> f64 {
        [&self.x, &self.f_r, &self.e_r, &self.f_p, &self.e_p]
            .iter()
            .flat_map(|v| v.iter())
            .map(linalg::max_abs_vec)
            .fold(0.0, f64::max)
    }
}

pub type SignalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Prescribed port halves, one scalar signal per external channel.
/// Signals may jump.
#[derive(Clone, Default)]
pub struct PortSignal {
    channels: Vec<SignalFn>,
}

impl fmt::Debug for PortSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PortSignal").field("channels", &self.channels.len()).finish()
    }
}

impl PortSignal {
    pub fn zeros(n_p: usize) -> Self {
        Self::constant(&vec![0.0; n_p])
    }

    pub fn constant(values: &[f64]) -> Self {
        Self {
            channels: values
                .iter()
                .map(|&v| Arc::new(move |_| v) as SignalFn)
                .collect(),
        }
    }

    pub fn new(channels: Vec<SignalFn>) -> Self {
        Self { channels }
    }

    pub fn set(&mut self, channel: usize, signal: impl Fn(f64) -> f64 + Send + Sync + 'static) {
        self.channels[channel] = Arc::new(signal);
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|s| s(t)))
    }
}
