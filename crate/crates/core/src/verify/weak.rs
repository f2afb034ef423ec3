use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::system::{PhsSystem, Trajectory};

/// Residuals of the weak formulation against hat test functions.
#[derive(Debug, Clone, Serialize)]
pub struct WeakReport {
    /// `max |r_{k,j}| / normalization`.
    pub max_residual: f64,
    /// `dt · (1 + largest sampled magnitude)`.
    pub normalization: f64,
    /// Interior node and component attaining the maximum.
    pub worst_node: usize,
    pub worst_component: usize,
    /// Raw residuals, one row per interior node `k = 1..M−1`.
    #[serde(skip)]
    pub table: DMatrix<f64>,
}

impl WeakReport {
    /// Largest normalized residual per interior node.
    pub fn node_maxima(&self) -> Vec<f64> {
        self.table
            .row_iter()
            .map(|r| r.amax() / self.normalization)
            .collect()
    }
}

// 2-point Gauss nodes on [0, 1]
const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Pairs the trajectory with `ψ_k e_j` for every interior node `k` and unit
/// vector `e_j`, moving the time derivative onto `ψ_k`:
///
/// ```text
/// r_{k,j} = ∫ ψ̇_k (F_s x)_j + ∫ ψ_k (G_s∇H(x) + G_r e_R + G_p e_P + F_r f_R + F_p f_P)_j
/// ```
///
/// `x` is interpolated linearly; interval data are piecewise constant.
pub fn weak_residual(sys: &PhsSystem, traj: &Trajectory) -> Result<WeakReport> {
    traj.check_dims(sys.dims())?;
    let dirac = sys.dirac();
    let (f_s, f_r, f_p) = (dirac.f_s(), dirac.f_r(), dirac.f_p());
    let (g_s, g_r, g_p) = (dirac.g_s(), dirac.g_r(), dirac.g_p());
    let ham = sys.hamiltonian();
    let dt = traj.dt();
    let m = traj.steps();
    let n = dirac.n();

    // per interval: G_s∇H at both Gauss points and the constant data term
    let per_interval: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = (0..m)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let (x0, x1) = (&traj.x[i], &traj.x[i + 1]);
            let at = |s: f64| x0 + (x1 - x0) * s;
            let g_lo = &g_s * ham.grad(&at(GAUSS_LO))?;
            let g_hi = &g_s * ham.grad(&at(GAUSS_HI))?;
            let data = &f_r * &traj.f_r[i] + &f_p * &traj.f_p[i] + &g_r * &traj.e_r[i] + &g_p * &traj.e_p[i];
            Ok((g_lo, g_hi, data))
        })
        .collect::<Result<_>>()?;
    let fx: Vec<DVector<f64>> = traj.x.par_iter().map(|x| &f_s * x).collect();

    let half = 0.5 * dt;
    let rows: Vec<DVector<f64>> = (1..m)
        .into_par_iter()
        .map(|k| {
            // ψ_k rises on interval k−1 and falls on interval k
            let (lo_l, hi_l, c_l) = &per_interval[k - 1];
            let (lo_r, hi_r, c_r) = &per_interval[k];
            let derivative_part = (&fx[k - 1] - &fx[k + 1]) * 0.5;
            let left = (lo_l * GAUSS_LO + hi_l * GAUSS_HI) * half + c_l * half;
            let right = (lo_r * (1.0 - GAUSS_LO) + hi_r * (1.0 - GAUSS_HI)) * half + c_r * half;
            derivative_part + left + right
        })
        .collect();

    let mut table = DMatrix::zeros(m.saturating_sub(1), n);
    for (k, row) in rows.iter().enumerate() {
        table.set_row(k, &row.transpose());
    }
    let normalization = dt * (1.0 + traj.max_magnitude());
    let (mut worst_node, mut worst_component, mut worst) = (0, 0, 0.0);
    for k in 0..table.nrows() {
        for j in 0..n {
            if table[(k, j)].abs() > worst {
                worst = table[(k, j)].abs();
                worst_node = k + 1;
                worst_component = j;
            }
        }
    }
    Ok(WeakReport {
        max_residual: worst / normalization,
        normalization,
        worst_node,
        worst_component,
        table,
    })
}
