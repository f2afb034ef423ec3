use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{dim_err, PhsError, Result};
use crate::linalg;

pub type RelationFamily = Arc<dyn Fn(&DVector<f64>) -> ResistiveRelation + Send + Sync>;

/// Passive relation between resistive flows and efforts.
#[derive(Clone)]
pub enum ResistiveRelation {
    /// `e_R = −R f_R` with `R + Rᵀ ⪰ 0`.
    LinearGraph { r: DMatrix<f64> },
    /// `f_R = A λ`, `e_R = B λ` with `AᵀB + BᵀA ⪯ 0`.
    Parametric { a: DMatrix<f64>, b: DMatrix<f64> },
    /// State-dependent family. Passivity can only be checked at sampled
    /// states, which are stored alongside the family.
    Modulated {
        n_r: usize,
        family: RelationFamily,
        samples: Vec<DVector<f64>>,
    },
}

impl fmt::Debug for ResistiveRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResistiveRelation::LinearGraph { r } => f.debug_struct("LinearGraph").field("r", r).finish(),
            ResistiveRelation::Parametric { a, b } => f.debug_struct("Parametric").field("a", a).field("b", b).finish(),
            ResistiveRelation::Modulated { n_r, samples, .. } => f
                .debug_struct("Modulated")
                .field("n_r", n_r)
                .field("samples", &samples.len())
                .finish(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistiveReport {
    pub passed: bool,
    pub kind: &'static str,
    /// Extreme eigenvalues of the symmetric part of `R` (linear graph) or of
    /// `AᵀB` (parametric), over all checked states.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub states_checked: usize,
}

impl ResistiveRelation {
    /// Relation on a zero-dimensional resistive port.
    pub fn none() -> Self {
        ResistiveRelation::LinearGraph { r: DMatrix::zeros(0, 0) }
    }

    pub fn linear(r: DMatrix<f64>) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(dim_err("R must be square"));
        }
        Ok(ResistiveRelation::LinearGraph { r })
    }

    pub fn parametric(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(dim_err("A and B must have the same shape"));
        }
        Ok(ResistiveRelation::Parametric { a, b })
    }

    pub fn modulated(
        n_r: usize,
        family: impl Fn(&DVector<f64>) -> ResistiveRelation + Send + Sync + 'static,
        samples: Vec<DVector<f64>>,
    ) -> Self {
        ResistiveRelation::Modulated {
            n_r,
            family: Arc::new(family),
            samples,
        }
    }

    /// Dimension `n_r` of the resistive flow space.
    pub fn dim(&self) -> usize {
        match self {
            ResistiveRelation::LinearGraph { r } => r.nrows(),
            ResistiveRelation::Parametric { a, .. } => a.nrows(),
            ResistiveRelation::Modulated { n_r, .. } => *n_r,
        }
    }

    /// Number of scalar unknowns parameterizing the relation (`f_R` or `λ`).
    pub fn unknowns(&self, x: &DVector<f64>) -> usize {
        match self.at(x).as_ref() {
            ResistiveRelation::LinearGraph { r } => r.nrows(),
            ResistiveRelation::Parametric { a, .. } => a.ncols(),
            ResistiveRelation::Modulated { .. } => unreachable!("family returned a modulated relation"),
        }
    }

    pub fn is_modulated(&self) -> bool {
        matches!(self, ResistiveRelation::Modulated { .. })
    }

    /// The fixed relation in force at state `x`.
    pub fn at(&self, x: &DVector<f64>) -> Cow<'_, ResistiveRelation> {
        match self {
            ResistiveRelation::Modulated { family, .. } => Cow::Owned(family(x)),
            other => Cow::Borrowed(other),
        }
    }

    /// `(f_R, e_R)` generated by the unknowns `z` at state `x`.
    pub fn port_values(&self, x: &DVector<f64>, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self.at(x).as_ref() {
            ResistiveRelation::LinearGraph { r } => (z.clone(), -(r * z)),
            ResistiveRelation::Parametric { a, b } => (a * z, b * z),
            ResistiveRelation::Modulated { .. } => unreachable!("family returned a modulated relation"),
        }
    }

    /// Linear maps `z ↦ f_R` and `z ↦ e_R` at state `x`.
    pub fn port_maps(&self, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        match self.at(x).as_ref() {
            ResistiveRelation::LinearGraph { r } => (DMatrix::identity(r.nrows(), r.nrows()), -r),
            ResistiveRelation::Parametric { a, b } => (a.clone(), b.clone()),
            ResistiveRelation::Modulated { .. } => unreachable!("family returned a modulated relation"),
        }
    }

    fn fixed_extremes(&self) -> (f64, f64, f64, &'static str) {
        match self {
            ResistiveRelation::LinearGraph { r } => {
                let (lo, hi) = linalg::symmetric_part_extremes(r);
                (lo, hi, linalg::max_abs(r), "linear_graph")
            }
            ResistiveRelation::Parametric { a, b } => {
                let m = a.transpose() * b;
                let (lo, hi) = linalg::symmetric_part_extremes(&m);
                (lo, hi, linalg::max_abs(&m), "parametric")
            }
            ResistiveRelation::Modulated { .. } => unreachable!("nested modulated relation"),
        }
    }

    /// Eigenvalue test on the symmetric part, relative to the matrix scale.
    pub fn check(&self, tol: f64) -> Result<ResistiveReport> {
        let states: Vec<DVector<f64>> = match self {
            ResistiveRelation::Modulated { samples, .. } => {
                if samples.is_empty() {
                    return Err(PhsError::InvalidArgument(
                        "modulated relation has no sample states to check".into(),
                    ));
                }
                samples.clone()
            }
            _ => vec![DVector::zeros(0)],
        };
        let mut report = ResistiveReport {
            passed: true,
            kind: "linear_graph",
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            states_checked: states.len(),
        };
        for x in &states {
            let rel = self.at(x);
            if rel.dim() != self.dim() {
                return Err(dim_err("modulated family changed the resistive dimension"));
            }
            if let ResistiveRelation::Parametric { a, b } = rel.as_ref() {
                if a.shape() != b.shape() {
                    return Err(dim_err("A and B must have the same shape"));
                }
            }
            let (lo, hi, scale, kind) = rel.fixed_extremes();
            report.kind = if self.is_modulated() { "modulated" } else { kind };
            report.min_eigenvalue = report.min_eigenvalue.min(lo);
            report.max_eigenvalue = report.max_eigenvalue.max(hi);
            let ok = match rel.as_ref() {
                ResistiveRelation::LinearGraph { .. } => lo >= -tol * scale,
                _ => hi <= tol * scale,
            };
            report.passed &= ok;
        }
        if self.dim() == 0 {
            report.min_eigenvalue = 0.0;
            report.max_eigenvalue = 0.0;
        }
        Ok(report)
    }

    /// Distance of `(f_R, e_R)` from the relation in force at `x`.
    pub fn residual(&self, x: &DVector<f64>, f: &DVector<f64>, e: &DVector<f64>) -> Result<f64> {
        if f.len() != self.dim() || e.len() != self.dim() {
            return Err(dim_err("resistive flow/effort length does not match n_r"));
        }
        Ok(match self.at(x).as_ref() {
            ResistiveRelation::LinearGraph { r } => (e + r * f).norm(),
            ResistiveRelation::Parametric { a, b } => {
                let q = linalg::column_space(&linalg::vstack(a, b));
                let v = linalg::concat(&[f, e]);
                let proj = &q * (q.transpose() * &v);
                (v - proj).norm()
            }
            ResistiveRelation::Modulated { .. } => unreachable!("nested modulated relation"),
        })
    }
}

pub fn resistive_check(r: &ResistiveRelation, tol: f64) -> Result<ResistiveReport> {
    r.check(tol)
}

pub fn resistive_residual(r: &ResistiveRelation, x: &DVector<f64>, f: &DVector<f64>, e: &DVector<f64>) -> Result<f64> {
    r.residual(x, f, e)
}
