//! Implicit time stepping of the port-Hamiltonian DAE.
//!
//! Each step solves the square system
//!
//! ```text
//! F·(−(x⁺ − x)/dt; f_R; f_P) + G·(ĝ; e_R; e_P) = 0
//! ```
//!
//! for the next state, the resistive parameters (`f_R` for a linear graph,
//! `λ` for a parametric relation) and the non-prescribed half of every port.
//! `ĝ` is `∇H` at the midpoint or the midpoint discrete gradient. Resistive
//! and port data are interval values, sampled at the interval midpoint.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{PhsError, Result};
use crate::linalg;
use crate::system::{Causality, PhsSystem, PortSignal, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitMidpoint,
    DiscreteGradient,
}

impl std::str::FromStr for Scheme {
    type Err = PhsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit_midpoint" | "midpoint" => Ok(Scheme::ImplicitMidpoint),
            "discrete_gradient" => Ok(Scheme::DiscreteGradient),
            other => Err(PhsError::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    FiniteDifference,
    /// Assembled from the Hamiltonian's analytic Hessian.
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub jacobian: JacobianMode,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            jacobian: JacobianMode::FiniteDifference,
        }
    }

    pub fn with_newton_tol(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn with_jacobian(mut self, mode: JacobianMode) -> Self {
        self.jacobian = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(PhsError::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(PhsError::InvalidArgument("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(PhsError::InvalidArgument("newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Unknowns of one step: next state, resistive parameters, free port halves.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUnknowns {
    pub x_next: DVector<f64>,
    pub resistive: DVector<f64>,
    pub port_free: DVector<f64>,
}

impl StepUnknowns {
    fn pack(&self) -> DVector<f64> {
        linalg::concat(&[&self.x_next, &self.resistive, &self.port_free])
    }

    fn unpack(u: &DVector<f64>, n_s: usize, n_z: usize) -> Self {
        let n_w = u.len() - n_s - n_z;
        Self {
            x_next: u.rows(0, n_s).into_owned(),
            resistive: u.rows(n_s, n_z).into_owned(),
            port_free: u.rows(n_s + n_z, n_w).into_owned(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub jacobian_evaluations: usize,
    pub max_residual: f64,
    /// 2-norm condition number of the step Jacobian at the initial data.
    pub initial_condition_number: f64,
}

/// Assembled per-step data at the converged unknowns.
struct StepData {
    f_r: DVector<f64>,
    e_r: DVector<f64>,
    f_p: DVector<f64>,
    e_p: DVector<f64>,
}

fn split_ports(causality: &[Causality], prescribed: &DVector<f64>, free: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n_p = causality.len();
    let mut f_p = DVector::zeros(n_p);
    let mut e_p = DVector::zeros(n_p);
    for (i, c) in causality.iter().enumerate() {
        match c {
            Causality::Effort => {
                e_p[i] = prescribed[i];
                f_p[i] = free[i];
            }
            Causality::Flow => {
                f_p[i] = prescribed[i];
                e_p[i] = free[i];
            }
        }
    }
    (f_p, e_p)
}

struct Stepper<'a> {
    sys: &'a PhsSystem,
    cfg: SchemeConfig,
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    n_z: usize,
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    stats: SolveStats,
}

impl<'a> Stepper<'a> {
    fn new(sys: &'a PhsSystem, cfg: SchemeConfig, x0: &DVector<f64>) -> Result<Self> {
        cfg.validate()?;
        let dims = sys.dims();
        let n_z = sys.resistive().unknowns(x0);
        if dims.n_s + n_z + dims.n_p != dims.n() {
            return Err(PhsError::InvalidArgument(format!(
                "per-step system is not square: {} unknowns for {} equations",
                dims.n_s + n_z + dims.n_p,
                dims.n()
            )));
        }
        if cfg.jacobian == JacobianMode::UserSupplied && sys.hamiltonian().hessian(x0).is_none() {
            return Err(PhsError::InvalidArgument(
                "user-supplied Jacobian requested but the Hamiltonian has no Hessian".into(),
            ));
        }
        Ok(Self {
            sys,
            cfg,
            f: sys.dirac().f().clone(),
            g: sys.dirac().g().clone(),
            n_z,
            lu: None,
            stats: SolveStats::default(),
        })
    }

    fn coenergy(&self, x: &DVector<f64>, x_next: &DVector<f64>) -> Result<DVector<f64>> {
        let ham = self.sys.hamiltonian();
        match self.cfg.scheme {
            Scheme::ImplicitMidpoint => ham.grad(&((x + x_next) * 0.5)),
            Scheme::DiscreteGradient => ham.discrete_gradient(x, x_next),
        }
    }

    fn data(&self, x: &DVector<f64>, prescribed: &DVector<f64>, u: &StepUnknowns) -> StepData {
        let mid = (x + &u.x_next) * 0.5;
        let (f_r, e_r) = self.sys.resistive().port_values(&mid, &u.resistive);
        let (f_p, e_p) = split_ports(self.sys.causality(), prescribed, &u.port_free);
        StepData { f_r, e_r, f_p, e_p }
    }

    fn residual(&self, x: &DVector<f64>, prescribed: &DVector<f64>, u_vec: &DVector<f64>) -> Result<DVector<f64>> {
        let n_s = self.sys.dims().n_s;
        let u = StepUnknowns::unpack(u_vec, n_s, self.n_z);
        let ghat = self.coenergy(x, &u.x_next)?;
        let d = self.data(x, prescribed, &u);
        let rate = (&u.x_next - x) / self.cfg.dt;
        let flows = linalg::concat(&[&(-rate), &d.f_r, &d.f_p]);
        let efforts = linalg::concat(&[&ghat, &d.e_r, &d.e_p]);
        Ok(&self.f * flows + &self.g * efforts)
    }

    fn jacobian(&mut self, x: &DVector<f64>, prescribed: &DVector<f64>, u_vec: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.stats.jacobian_evaluations += 1;
        match self.cfg.jacobian {
            JacobianMode::FiniteDifference => {
                let n = u_vec.len();
                let r0 = self.residual(x, prescribed, u_vec)?;
                let mut jac = DMatrix::zeros(r0.len(), n);
                for j in 0..n {
                    let h = f64::EPSILON.sqrt() * (1.0 + u_vec[j].abs());
                    let mut up = u_vec.clone();
                    up[j] += h;
                    let rj = self.residual(x, prescribed, &up)?;
                    jac.set_column(j, &((rj - &r0) / h));
                }
                Ok(jac)
            }
            JacobianMode::UserSupplied => {
                let dims = self.sys.dims();
                let (n_s, n_r) = (dims.n_s, dims.n_r);
                let u = StepUnknowns::unpack(u_vec, n_s, self.n_z);
                let mid = (x + &u.x_next) * 0.5;
                let hess = self
                    .sys
                    .hamiltonian()
                    .hessian(&mid)
                    .expect("checked at construction")?;
                let dirac = self.sys.dirac();
                let dx = -dirac.f_s() / self.cfg.dt + dirac.g_s() * hess * 0.5;
                let (mf, me) = self.sys.resistive().port_maps(&mid);
                let dz = dirac.f_r() * mf + dirac.g_r() * me;
                let mut jac = DMatrix::zeros(dims.n(), u_vec.len());
                jac.view_mut((0, 0), dx.shape()).copy_from(&dx);
                jac.view_mut((0, n_s), dz.shape()).copy_from(&dz);
                for (i, c) in self.sys.causality().iter().enumerate() {
                    let col = match c {
                        Causality::Effort => self.f.column(n_s + n_r + i),
                        Causality::Flow => self.g.column(n_s + n_r + i),
                    };
                    jac.set_column(n_s + self.n_z + i, &col);
                }
                Ok(jac)
            }
        }
    }

    fn refresh(&mut self, x: &DVector<f64>, prescribed: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        let jac = self.jacobian(x, prescribed, u)?;
        if self.stats.jacobian_evaluations == 1 {
            let sv = jac.singular_values();
            let lo = sv.min();
            self.stats.initial_condition_number = if lo > 0.0 { sv.max() / lo } else { f64::INFINITY };
        }
        self.lu = Some(jac.lu());
        Ok(())
    }

    /// Modified Newton: the factorization is reused across iterations and
    /// steps until the contraction rate degrades.
    fn step(
        &mut self,
        step_index: usize,
        x: &DVector<f64>,
        prescribed: &DVector<f64>,
        guess: StepUnknowns,
    ) -> Result<(StepUnknowns, StepData)> {
        let newton_err = |iterations, residual| PhsError::Newton {
            step: step_index,
            iterations,
            residual,
        };
        let mut u = guess.pack();
        let mut r = self.residual(x, prescribed, &u)?;
        let mut rn = linalg::max_abs_vec(&r);
        let mut iterations = 0;
        let mut fresh = false;
        while !(rn <= self.cfg.newton_tol) {
            if iterations >= self.cfg.newton_max_iter || !rn.is_finite() {
                return Err(newton_err(iterations, rn));
            }
            if self.lu.is_none() {
                self.refresh(x, prescribed, &u)?;
                fresh = true;
            }
            let delta = match self.lu.as_ref().and_then(|lu| lu.solve(&(-&r))) {
                Some(d) => d,
                None if !fresh => {
                    self.lu = None;
                    continue;
                }
                None => return Err(newton_err(iterations, rn)),
            };
            let u_new = &u + delta;
            let r_new = self.residual(x, prescribed, &u_new)?;
            let rn_new = linalg::max_abs_vec(&r_new);
            iterations += 1;
            if !(rn_new <= 0.25 * rn) && rn_new > self.cfg.newton_tol {
                // slow contraction: rebuild the Jacobian at the new iterate
                self.lu = None;
                fresh = false;
            }
            u = u_new;
            r = r_new;
            rn = rn_new;
        }
        self.stats.newton_iterations += iterations;
        self.stats.max_residual = self.stats.max_residual.max(rn);
        let sol = StepUnknowns::unpack(&u, self.sys.dims().n_s, self.n_z);
        let data = self.data(x, prescribed, &sol);
        Ok((sol, data))
    }
}

/// Number of uniform steps covering `[t0, t1]` with step at most `dt`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(t1 > t0) {
        return Err(PhsError::InvalidArgument(format!("empty time span [{t0}, {t1}]")));
    }
    let m = ((t1 - t0) / dt - 1e-9).ceil().max(1.0);
    Ok(m as usize)
}

/// Simulates on `[t_span.0, t_span.1]`. The step is shrunk, if necessary,
/// so that a whole number of uniform steps covers the span.
pub fn simulate(
    sys: &PhsSystem,
    x0: &DVector<f64>,
    inputs: &PortSignal,
    t_span: (f64, f64),
    cfg: SchemeConfig,
) -> Result<Trajectory> {
    simulate_with_stats(sys, x0, inputs, t_span, cfg).map(|(traj, _)| traj)
}

pub fn simulate_with_stats(
    sys: &PhsSystem,
    x0: &DVector<f64>,
    inputs: &PortSignal,
    t_span: (f64, f64),
    cfg: SchemeConfig,
) -> Result<(Trajectory, SolveStats)> {
    let dims = sys.dims();
    if x0.len() != dims.n_s {
        return Err(PhsError::Dimension(format!("x0 has length {}, n_s = {}", x0.len(), dims.n_s)));
    }
    if inputs.len() != dims.n_p {
        return Err(PhsError::Dimension(format!("{} input signals for n_p = {}", inputs.len(), dims.n_p)));
    }
    cfg.validate()?;
    let (t0, t1) = t_span;
    let steps = step_count(t0, t1, cfg.dt)?;
    let dt = (t1 - t0) / steps as f64;
    let cfg = SchemeConfig { dt, ..cfg };
    let mut stepper = Stepper::new(sys, cfg, x0)?;

    let mut t = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let (mut f_r, mut e_r, mut f_p, mut e_p) = (
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
    );
    t.push(t0);
    xs.push(x0.clone());
    let mut guess = StepUnknowns {
        x_next: x0.clone(),
        resistive: DVector::zeros(stepper.n_z),
        port_free: DVector::zeros(dims.n_p),
    };
    for k in 0..steps {
        let tk = t0 + k as f64 * dt;
        let prescribed = inputs.eval(tk + 0.5 * dt);
        let x = xs[k].clone();
        guess.x_next = x.clone();
        let (sol, data) = stepper.step(k, &x, &prescribed, guess)?;
        t.push(if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt });
        xs.push(sol.x_next.clone());
        f_r.push(data.f_r);
        e_r.push(data.e_r);
        f_p.push(data.f_p);
        e_p.push(data.e_p);
        guess = sol;
    }
    stepper.stats.steps = steps;
    let traj = Trajectory::new(t, xs, f_r, e_r, f_p, e_p)?;
    Ok((traj, stepper.stats))
}

/// Result of projecting an initial guess onto the algebraic constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentInit {
    pub x0: DVector<f64>,
    /// `‖x0 − x_guess‖`.
    pub distance: f64,
    /// Algebraic residual at `x0`.
    pub residual: f64,
    /// Number of independent algebraic rows (`dim ker F_sᵀ`).
    pub algebraic_rows: usize,
}

fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let cutoff = 1e-10 * svd.singular_values.max();
    svd.pseudo_inverse(cutoff.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(c, r))
}

/// Projects `x_guess` onto the states compatible with the algebraic rows
/// of the DAE (directions in `ker F_sᵀ`) given port inputs `prescribed` at
/// the initial time. Resistive parameters and free port halves are free.
pub fn consistent_init(
    sys: &PhsSystem,
    x_guess: &DVector<f64>,
    prescribed: &DVector<f64>,
    tol: f64,
) -> Result<ConsistentInit> {
    let dims = sys.dims();
    if x_guess.len() != dims.n_s || prescribed.len() != dims.n_p {
        return Err(PhsError::Dimension("initial guess or port inputs have the wrong length".into()));
    }
    let dirac = sys.dirac();
    let z = linalg::null_space(&dirac.f_s().transpose());
    let k = z.ncols();
    if k == 0 {
        return Ok(ConsistentInit {
            x0: x_guess.clone(),
            distance: 0.0,
            residual: 0.0,
            algebraic_rows: 0,
        });
    }
    let res = sys.resistive();
    let n_z = res.unknowns(x_guess);
    let (f_r_blk, f_p_blk, g_s, g_r, g_p) = (dirac.f_r(), dirac.f_p(), dirac.g_s(), dirac.g_r(), dirac.g_p());

    // full non-differential part of the kernel equations
    let algebraic = |x: &DVector<f64>, y: &DVector<f64>| -> Result<DVector<f64>> {
        let zr = y.rows(0, n_z).into_owned();
        let w = y.rows(n_z, dims.n_p).into_owned();
        let (f_r, e_r) = res.port_values(x, &zr);
        let (f_p, e_p) = split_ports(sys.causality(), prescribed, &w);
        Ok(&f_r_blk * f_r + &f_p_blk * f_p + &g_s * sys.hamiltonian().grad(x)? + &g_r * e_r + &g_p * e_p)
    };
    let y_jac = |x: &DVector<f64>| -> DMatrix<f64> {
        let (mf, me) = res.port_maps(x);
        let mut jy = DMatrix::zeros(dims.n(), n_z + dims.n_p);
        jy.view_mut((0, 0), (dims.n(), n_z)).copy_from(&(&f_r_blk * mf + &g_r * me));
        for (i, c) in sys.causality().iter().enumerate() {
            let col = match c {
                Causality::Effort => f_p_blk.column(i).into_owned(),
                Causality::Flow => g_p.column(i).into_owned(),
            };
            jy.set_column(n_z + i, &col);
        }
        jy
    };

    let zt = z.transpose();
    let mut x = x_guess.clone();
    let mut y = DVector::zeros(n_z + dims.n_p);
    let mut c = &zt * algebraic(&x, &y)?;
    for _ in 0..50 {
        let hess = match sys.hamiltonian().hessian(&x) {
            Some(h) => h?,
            None => sys.hamiltonian().hessian_fd(&x)?,
        };
        let cx = &zt * &g_s * hess;
        let cy = &zt * y_jac(&x);
        let cy_pinv = pinv(&cy);
        let p = DMatrix::identity(k, k) - &cy * &cy_pinv;
        let a = &p * &cx;
        let rhs = -(&p * &c);
        let to_guess = x_guess - &x;
        let dx = &to_guess - pinv(&a) * (&a * &to_guess - rhs);
        let dy = -(&cy_pinv * (&c + &cx * &dx));
        x += dx;
        y += dy;
        let c_new = &zt * algebraic(&x, &y)?;
        let settled = (&c_new - &c).norm() <= f64::EPSILON * (1.0 + c.norm());
        c = c_new;
        if linalg::max_abs_vec(&c) <= tol || settled {
            break;
        }
    }
    let residual = linalg::max_abs_vec(&c);
    if residual > tol {
        let full = &z * (&zt * algebraic(&x, &y)?);
        let (row, violation) = full
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        return Err(PhsError::Inconsistent { row, violation });
    }
    Ok(ConsistentInit {
        distance: (&x - x_guess).norm(),
        x0: x,
        residual,
        algebraic_rows: k,
    })
}
