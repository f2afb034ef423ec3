use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::{dim_err, PhsError, Result};
use crate::linalg;

pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;

/// `H(x) = ½ xᵀHx + bᵀx + c` with symmetric `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    h: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl QuadraticHamiltonian {
    pub fn new(h: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || b.len() != n {
            return Err(dim_err(format!(
                "quadratic Hamiltonian with H {}x{} and b of length {}",
                h.nrows(),
                h.ncols(),
                b.len()
            )));
        }
        let asym = linalg::max_abs(&(&h - h.transpose()));
        if asym > 1e-12 * linalg::max_abs(&h).max(1.0) {
            return Err(PhsError::Validation(format!("H is not symmetric (defect {asym:.3e})")));
        }
        Ok(Self { h, b, c })
    }

    /// `½‖x‖²` scaled by `weight`.
    pub fn scaled_identity(n: usize, weight: f64) -> Self {
        Self {
            h: DMatrix::identity(n, n) * weight,
            b: DVector::zeros(n),
            c: 0.0,
        }
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.b.dot(x) + self.c
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.b
    }
}

/// Identifies a Hamiltonian that the system file format can rebuild by name.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinTag {
    pub name: String,
    pub params: Value,
}

/// Energy given by user callbacks. Callbacks must be reentrant.
#[derive(Clone)]
pub struct GeneralHamiltonian {
    dim: usize,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: Option<MatrixFn>,
    domain: Option<DomainFn>,
    builtin: Option<BuiltinTag>,
}

impl fmt::Debug for GeneralHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralHamiltonian")
            .field("dim", &self.dim)
            .field("hessian", &self.hessian.is_some())
            .field("domain", &self.domain.is_some())
            .field("builtin", &self.builtin)
            .finish()
    }
}

impl GeneralHamiltonian {
    pub fn new(
        dim: usize,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
            domain: None,
            builtin: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// Restricts the Hamiltonian to the open set where `domain` holds.
    pub fn with_domain(mut self, domain: impl Fn(&DVector<f64>) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn with_builtin(mut self, tag: BuiltinTag) -> Self {
        self.builtin = Some(tag);
        self
    }

    pub fn builtin(&self) -> Option<&BuiltinTag> {
        self.builtin.as_ref()
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// Largest relative mismatch between the supplied gradient and central
    /// differences of the value at `points`.
    pub fn gradient_consistency(&self, points: &[DVector<f64>], step: f64) -> f64 {
        let mut worst = 0.0_f64;
        for x in points {
            let g = (self.gradient)(x);
            let mut fd = DVector::zeros(self.dim);
            for i in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                fd[i] = ((self.value)(&xp) - (self.value)(&xm)) / (2.0 * step);
            }
            let err = (&fd - &g).norm() / g.norm().max(1.0);
            worst = worst.max(err);
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub enum Hamiltonian {
    Quadratic(QuadraticHamiltonian),
    General(GeneralHamiltonian),
}

impl From<QuadraticHamiltonian> for Hamiltonian {
    fn from(h: QuadraticHamiltonian) -> Self {
        Hamiltonian::Quadratic(h)
    }
}

impl From<GeneralHamiltonian> for Hamiltonian {
    fn from(h: GeneralHamiltonian) -> Self {
        Hamiltonian::General(h)
    }
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Quadratic(q) => q.h.nrows(),
            Hamiltonian::General(g) => g.dim,
        }
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(dim_err(format!("state of length {} for n_s = {}", x.len(), self.dim())));
        }
        if let Hamiltonian::General(g) = self {
            if let Some(domain) = &g.domain {
                if !domain(x) {
                    return Err(PhsError::Domain(format!("{:?}", x.as_slice())));
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PhsError::Domain("non-finite state".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            Hamiltonian::Quadratic(q) => q.value(x),
            Hamiltonian::General(g) => (g.value)(x),
        })
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        Ok(match self {
            Hamiltonian::Quadratic(q) => q.gradient(x),
            Hamiltonian::General(g) => (g.gradient)(x),
        })
    }

    /// Analytic Hessian when one is known.
    pub fn hessian(&self, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        match self {
            Hamiltonian::Quadratic(q) => Some(self.check(x).map(|_| q.h.clone())),
            Hamiltonian::General(g) => g.hessian.as_ref().map(|h| self.check(x).map(|_| h(x))),
        }
    }

    /// Forward-difference Hessian built from gradient evaluations.
    pub fn hessian_fd(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let g0 = self.grad(x)?;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            let step = f64::EPSILON.sqrt() * (1.0 + x[i].abs());
            let mut xp = x.clone();
            xp[i] += step;
            let gi = self.grad(&xp)?;
            out.set_column(i, &((gi - &g0) / step));
        }
        Ok((&out + out.transpose()) * 0.5)
    }

    /// Midpoint (Gonzalez) discrete gradient: `g·(y − x) = H(y) − H(x)`.
    pub fn discrete_gradient(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(dim_err("discrete gradient arguments have the wrong length"));
        }
        let mid = (x + y) * 0.5;
        match self {
            // the chord identity holds exactly for the midpoint gradient
            Hamiltonian::Quadratic(q) => {
                self.check(&mid)?;
                Ok(q.gradient(&mid))
            }
            Hamiltonian::General(_) => {
                let delta = y - x;
                let dd = delta.norm_squared();
                if dd == 0.0 {
                    return self.grad(x);
                }
                let gm = self.grad(&mid)?;
                let jump = self.eval(y)? - self.eval(x)? - gm.dot(&delta);
                Ok(gm + delta * (jump / dd))
            }
        }
    }
}

pub fn ham_eval(h: &Hamiltonian, x: &DVector<f64>) -> Result<f64> {
    h.eval(x)
}

pub fn ham_grad(h: &Hamiltonian, x: &DVector<f64>) -> Result<DVector<f64>> {
    h.grad(x)
}

pub fn discrete_gradient(h: &Hamiltonian, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    h.discrete_gradient(x, y)
}
