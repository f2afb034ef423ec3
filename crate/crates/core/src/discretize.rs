//! Structure-preserving semidiscretizations of a nonlinear vibrating string
//! and of 1-D diffusion, plus the small oscillator examples.
//!
//! Both generators use staggered grids, so the assembled pair `(F, G)` is a
//! Dirac structure in exact arithmetic.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::dirac::{DiracKernelRep, Dims};
use crate::energy::{BuiltinTag, GeneralHamiltonian, Hamiltonian, QuadraticHamiltonian, ResistiveRelation};
use crate::error::{dim_err, PhsError, Result};
use crate::quadrature::GaussLegendre;
use crate::system::{assemble, Causality, PhsSystem};

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ForceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Restoring force `F(ξ, ε)` of the string.
#[derive(Clone)]
pub enum ForceLaw {
    /// `F = k ε`.
    Linear { stiffness: f64 },
    /// `F = k tanh(ε)`.
    Tanh { stiffness: f64 },
    Custom { force: ForceFn, lipschitz: f64 },
}

impl std::fmt::Debug for ForceLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForceLaw::Linear { stiffness } => write!(f, "Linear({stiffness})"),
            ForceLaw::Tanh { stiffness } => write!(f, "Tanh({stiffness})"),
            ForceLaw::Custom { lipschitz, .. } => write!(f, "Custom(L = {lipschitz})"),
        }
    }
}

impl ForceLaw {
    pub fn eval(&self, xi: f64, eps: f64) -> f64 {
        match self {
            ForceLaw::Linear { stiffness } => stiffness * eps,
            ForceLaw::Tanh { stiffness } => stiffness * eps.tanh(),
            ForceLaw::Custom { force, .. } => force(xi, eps),
        }
    }

    /// `∂F/∂ε`.
    pub fn slope(&self, xi: f64, eps: f64) -> f64 {
        match self {
            ForceLaw::Linear { stiffness } => *stiffness,
            ForceLaw::Tanh { stiffness } => {
                let c = eps.cosh();
                stiffness / (c * c)
            }
            ForceLaw::Custom { force, .. } => {
                let h = 1e-6 * (1.0 + eps.abs());
                (force(xi, eps + h) - force(xi, eps - h)) / (2.0 * h)
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            ForceLaw::Linear { stiffness } | ForceLaw::Tanh { stiffness } => stiffness.abs(),
            ForceLaw::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    fn tag(&self) -> Option<Value> {
        match self {
            ForceLaw::Linear { stiffness } => Some(json!({"kind": "linear", "stiffness": stiffness})),
            ForceLaw::Tanh { stiffness } => Some(json!({"kind": "tanh", "stiffness": stiffness})),
            ForceLaw::Custom { .. } => None,
        }
    }

    fn from_tag(v: &Value) -> Result<Self> {
        let stiffness = v.get("stiffness").and_then(Value::as_f64).unwrap_or(1.0);
        match v.get("kind").and_then(Value::as_str) {
            Some("linear") => Ok(ForceLaw::Linear { stiffness }),
            Some("tanh") => Ok(ForceLaw::Tanh { stiffness }),
            other => Err(PhsError::Parse(format!("unknown force law {other:?}"))),
        }
    }
}

const PSI_PANELS: usize = 4;
const PSI_POINTS: usize = 8;

/// `Ψ(ξ, ε) = ∫₀^ε F(ξ, ζ) dζ` by composite Gauss–Legendre
/// (4 panels of 8 points).
pub fn psi_potential(force: &ForceLaw, xi: f64, eps: f64) -> f64 {
    psi_with(&GaussLegendre::new(PSI_POINTS), force, xi, eps)
}

fn psi_with(rule: &GaussLegendre, force: &ForceLaw, xi: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    rule.integrate_composite(0.0, eps, PSI_PANELS, |z| force.eval(xi, z))
}

/// Uniform 1-D grid: `nodes` are cell endpoints, `centers` cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub centers: Vec<f64>,
}

impl Grid {
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(PhsError::InvalidArgument(format!("invalid interval [{a}, {b}]")));
        }
        let h = (b - a) / cells as f64;
        Ok(Self {
            a,
            b,
            h,
            nodes: (0..=cells).map(|i| a + i as f64 * h).collect(),
            centers: (0..cells).map(|i| a + (i as f64 + 0.5) * h).collect(),
        })
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Clone)]
pub struct StringSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub rho: Profile,
    pub force: ForceLaw,
    /// Causality at `a` and `b`: `Effort` prescribes the end velocity
    /// (clamped when zero), `Flow` prescribes the end force.
    pub ends: [Causality; 2],
}

impl StringSpec {
    /// Unit interval, unit density, clamped ends.
    pub fn new(n: usize, force: ForceLaw) -> Self {
        Self {
            n,
            a: 0.0,
            b: 1.0,
            rho: Arc::new(|_| 1.0),
            force,
            ends: [Causality::Effort, Causality::Effort],
        }
    }

    pub fn with_ends(mut self, left: Causality, right: Causality) -> Self {
        self.ends = [left, right];
        self
    }

    pub fn with_density(mut self, rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.rho = Arc::new(rho);
        self
    }
}

#[derive(Debug, Clone)]
pub struct StringSystem {
    pub system: PhsSystem,
    pub grid: Grid,
    /// Lumped node masses.
    pub masses: Vec<f64>,
}

impl StringSystem {
    /// State from nodal velocity and cell strain profiles.
    pub fn state(&self, velocity: impl Fn(f64) -> f64, strain: impl Fn(f64) -> f64) -> DVector<f64> {
        let n = self.grid.cells();
        let mut x = DVector::zeros(2 * n + 1);
        for (i, &xi) in self.grid.nodes.iter().enumerate() {
            x[i] = self.masses[i] * velocity(xi);
        }
        for (j, &xi) in self.grid.centers.iter().enumerate() {
            x[n + 1 + j] = strain(xi);
        }
        x
    }
}

fn string_hamiltonian(grid: &Grid, masses: Vec<f64>, force: ForceLaw) -> GeneralHamiltonian {
    let n = grid.cells();
    let h = grid.h;
    let tag = force.tag().map(|f| BuiltinTag {
        name: "string".into(),
        params: json!({"n": n, "a": grid.a, "b": grid.b, "masses": masses, "force": f}),
    });
    let centers = Arc::new(grid.centers.clone());
    let masses = Arc::new(masses);
    let rule = Arc::new(GaussLegendre::new(PSI_POINTS));
    let (m1, m2, m3) = (masses.clone(), masses.clone(), masses);
    let (c1, c2, c3) = (centers.clone(), centers.clone(), centers);
    let (f1, f2, f3) = (force.clone(), force.clone(), force);
    let value = move |x: &DVector<f64>| {
        let kinetic: f64 = (0..=n).map(|i| x[i] * x[i] / (2.0 * m1[i])).sum();
        let potential: f64 = (0..n).map(|j| h * psi_with(&rule, &f1, c1[j], x[n + 1 + j])).sum();
        kinetic + potential
    };
    let gradient = move |x: &DVector<f64>| {
        DVector::from_fn(2 * n + 1, |k, _| {
            if k <= n {
                x[k] / m2[k]
            } else {
                h * f2.eval(c2[k - n - 1], x[k])
            }
        })
    };
    let hessian = move |x: &DVector<f64>| {
        let d = DVector::from_fn(2 * n + 1, |k, _| {
            if k <= n {
                1.0 / m3[k]
            } else {
                h * f3.slope(c3[k - n - 1], x[k])
            }
        });
        DMatrix::from_diagonal(&d)
    };
    let ham = GeneralHamiltonian::new(2 * n + 1, value, gradient).with_hessian(hessian);
    match tag {
        Some(t) => ham.with_builtin(t),
        None => ham,
    }
}

/// Nodes carry momenta `p_i`, cells carry strains `ε_j`:
/// `ε̇ = D v / h`, `ṗ = −Dᵀ(hσ) / h + B f_P`, `e_P = Bᵀ v` with `B = [e_0, e_N]`.
/// Port flows are the end forces `(−F(a), F(b))`, efforts the end velocities.
pub fn string_system(spec: &StringSpec) -> Result<StringSystem> {
    let n = spec.n;
    if n < 2 {
        return Err(dim_err(format!("string needs at least 2 cells, got {n}")));
    }
    let grid = Grid::uniform(spec.a, spec.b, n)?;
    let h = grid.h;
    let mut masses = Vec::with_capacity(n + 1);
    for (i, &xi) in grid.nodes.iter().enumerate() {
        let rho = (spec.rho)(xi);
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(PhsError::InvalidArgument(format!("density {rho} at ξ = {xi} is not positive")));
        }
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        masses.push(w * h * rho);
    }
    let n_s = 2 * n + 1;
    let dims = Dims::new(n_s, 0, 2);
    let mut j = DMatrix::zeros(n_s, n_s);
    for c in 0..n {
        // (Dv)_c = v_{c+1} − v_c
        j[(n + 1 + c, c + 1)] = 1.0 / h;
        j[(n + 1 + c, c)] = -1.0 / h;
        j[(c + 1, n + 1 + c)] = -1.0 / h;
        j[(c, n + 1 + c)] = 1.0 / h;
    }
    let mut coupling = DMatrix::zeros(n_s, 2);
    coupling[(0, 0)] = 1.0;
    coupling[(n, 1)] = 1.0;
    let dirac = DiracKernelRep::interconnection(dims, &j, &coupling, &[true, true])?;
    let ham = string_hamiltonian(&grid, masses.clone(), spec.force.clone());
    let system = assemble(dirac, ham, ResistiveRelation::none(), spec.ends.to_vec())?;
    Ok(StringSystem { system, grid, masses })
}

#[derive(Clone)]
pub struct DiffusionSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub coeff: Profile,
    /// `Effort` prescribes the inward flux (insulated when zero), `Flow`
    /// prescribes the boundary trace.
    pub ends: [Causality; 2],
}

impl DiffusionSpec {
    /// Unit interval, unit coefficient, insulated ends.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            a: 0.0,
            b: 1.0,
            coeff: Arc::new(|_| 1.0),
            ends: [Causality::Effort, Causality::Effort],
        }
    }

    pub fn with_ends(mut self, left: Causality, right: Causality) -> Self {
        self.ends = [left, right];
        self
    }

    pub fn with_coefficient(mut self, a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.coeff = Arc::new(a);
        self
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionSystem {
    pub system: PhsSystem,
    pub grid: Grid,
    /// Coefficient sampled at the interior faces.
    pub face_coeff: Vec<f64>,
}

impl DiffusionSystem {
    pub fn state(&self, profile: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.grid.cells(), self.grid.centers.iter().map(|&xi| profile(xi)))
    }

    /// Discrete mass `Σ h x_i`.
    pub fn mass(&self, x: &DVector<f64>) -> f64 {
        self.grid.h * x.sum()
    }
}

/// Cell averages `x_i`, `H = (h/2)Σx_i²`. Interior faces carry
/// `f_R = (x_j − x_{j−1})/h` with `e_R = −h a_j f_R`; boundary ports carry the
/// nearest-cell traces `f_P = (x_0, x_{N−1})` and the inward fluxes `e_P`.
pub fn diffusion_system(spec: &DiffusionSpec) -> Result<DiffusionSystem> {
    let n = spec.n;
    if n < 2 {
        return Err(dim_err(format!("diffusion needs at least 2 cells, got {n}")));
    }
    let grid = Grid::uniform(spec.a, spec.b, n)?;
    let h = grid.h;
    let face_coeff: Vec<f64> = grid.nodes[1..n]
        .iter()
        .map(|&xi| {
            let a = (spec.coeff)(xi);
            if a > 0.0 && a.is_finite() {
                Ok(a)
            } else {
                Err(PhsError::InvalidArgument(format!("coefficient {a} at ξ = {xi} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let n_r = n - 1;
    let dims = Dims::new(n, n_r, 2);
    let mut coupling = DMatrix::zeros(n, n_r + 2);
    let h2 = h * h;
    for face in 1..n {
        coupling[(face, face - 1)] = 1.0 / h2;
        coupling[(face - 1, face - 1)] = -1.0 / h2;
    }
    coupling[(0, n_r)] = 1.0 / h;
    coupling[(n - 1, n_r + 1)] = 1.0 / h;
    let dirac = DiracKernelRep::interconnection(dims, &DMatrix::zeros(n, n), &coupling, &vec![false; n_r + 2])?;
    let r = DMatrix::from_diagonal(&DVector::from_iterator(n_r, face_coeff.iter().map(|a| h * a)));
    let system = assemble(
        dirac,
        QuadraticHamiltonian::scaled_identity(n, h),
        ResistiveRelation::linear(r)?,
        spec.ends.to_vec(),
    )?;
    Ok(DiffusionSystem { system, grid, face_coeff })
}

/// Rebuilds a named Hamiltonian from its parameters.
pub fn builtin_hamiltonian(name: &str, params: &Value) -> Result<Hamiltonian> {
    let num = |key: &str| {
        params
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| PhsError::Parse(format!("builtin '{name}' needs numeric '{key}'")))
    };
    match name {
        "string" => {
            let n = num("n")? as usize;
            let grid = Grid::uniform(num("a")?, num("b")?, n)?;
            let masses: Vec<f64> = params
                .get("masses")
                .and_then(Value::as_array)
                .ok_or_else(|| PhsError::Parse("builtin 'string' needs 'masses'".into()))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| PhsError::Parse("non-numeric mass".into())))
                .collect::<Result<_>>()?;
            if masses.len() != n + 1 || masses.iter().any(|&m| !(m > 0.0)) {
                return Err(PhsError::Parse(format!("'string' needs {} positive masses", n + 1)));
            }
            let force = ForceLaw::from_tag(params.get("force").unwrap_or(&Value::Null))?;
            Ok(string_hamiltonian(&grid, masses, force).into())
        }
        "diffusion" => {
            let n = num("n")? as usize;
            let h = num("h")?;
            Ok(QuadraticHamiltonian::scaled_identity(n, h).into())
        }
        other => Err(PhsError::Parse(format!("unknown builtin Hamiltonian '{other}'"))),
    }
}

/// `ẋ = J x` with `J = [[0, 1], [−1, 0]]`, `H = ½|x|²`.
pub fn oscillator() -> PhsSystem {
    let f = DMatrix::identity(2, 2);
    let g = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let rep = DiracKernelRep::new(Dims::new(2, 0, 0), f, g).expect("static dimensions");
    assemble(rep, QuadraticHamiltonian::scaled_identity(2, 1.0), ResistiveRelation::none(), vec![])
        .expect("oscillator is a valid system")
}

/// Oscillator with a linear damper `e_R = −c f_R` on the velocity.
pub fn damped_oscillator(c: f64) -> Result<PhsSystem> {
    let f = DMatrix::from_diagonal(&DVector::from_row_slice(&[-1.0, -1.0, 1.0]));
    let g = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0]);
    let rep = DiracKernelRep::new(Dims::new(2, 1, 0), f, g)?;
    let r = DMatrix::from_element(1, 1, c);
    assemble(rep, QuadraticHamiltonian::scaled_identity(2, 1.0), ResistiveRelation::linear(r)?, vec![])
}

/// Oscillator with an external force entering the momentum equation; the
/// port effort is the velocity.
pub fn forced_oscillator() -> PhsSystem {
    let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let rep = DiracKernelRep::interconnection(Dims::new(2, 0, 1), &j, &b, &[true]).expect("static dimensions");
    assemble(rep, QuadraticHamiltonian::scaled_identity(2, 1.0), ResistiveRelation::none(), vec![Causality::Flow])
        .expect("forced oscillator is a valid system")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_trivial_values() {
        let lin = ForceLaw::Linear { stiffness: 1.0 };
        assert!((psi_potential(&lin, 0.3, 2.0) - 2.0).abs() < 1e-14);
        assert_eq!(psi_potential(&lin, 0.3, 0.0), 0.0);
    }

    #[test]
    fn small_generators_have_expected_sizes() {
        let s = string_system(&StringSpec::new(2, ForceLaw::Linear { stiffness: 1.0 })).unwrap();
        assert_eq!(s.system.dims().n(), 7);
        assert!(s.system.report().dirac.skew_defect <= 1e-14);
        let d = diffusion_system(&DiffusionSpec::new(3)).unwrap();
        assert_eq!(d.system.dims(), Dims::new(3, 2, 2));
    }

    #[test]
    fn masses_are_trapezoidal() {
        let s = string_system(&StringSpec::new(4, ForceLaw::Linear { stiffness: 1.0 }).with_density(|xi| 1.0 + xi))
            .unwrap();
        let total: f64 = s.masses.iter().sum();
        // trapezoidal rule of 1 + ξ on [0, 1] is exact
        assert!((total - 1.5).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_samples_are_rejected() {
        let bad = StringSpec::new(3, ForceLaw::Linear { stiffness: 1.0 }).with_density(|_| 0.0);
        assert!(string_system(&bad).is_err());
        assert!(diffusion_system(&DiffusionSpec::new(3).with_coefficient(|xi| xi - 0.5)).is_err());
        assert!(diffusion_system(&DiffusionSpec::new(1)).is_err());
    }

    #[test]
    fn builtin_round_trip_matches_values() {
        let s = string_system(&StringSpec::new(5, ForceLaw::Tanh { stiffness: 2.0 })).unwrap();
        let Hamiltonian::General(g) = s.system.hamiltonian() else { panic!("expected general") };
        let tag = g.builtin().unwrap();
        let rebuilt = builtin_hamiltonian(&tag.name, &tag.params).unwrap();
        let x = DVector::from_fn(11, |i, _| 0.1 * i as f64 - 0.3);
        assert_eq!(rebuilt.eval(&x).unwrap(), s.system.hamiltonian().eval(&x).unwrap());
        assert!(builtin_hamiltonian("nope", &json!({})).is_err());
    }
}
