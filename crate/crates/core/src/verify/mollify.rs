use nalgebra::DVector;
use rayon::prelude::*;

use crate::dirac::BondVector;
use crate::energy::Hamiltonian;
use crate::error::{PhsError, Result};
use crate::quadrature::GaussLegendre;
use crate::system::{PhsSystem, Trajectory};

/// `1 / ∫_{−1}^{1} exp(−1/(1−s²)) ds`.
pub const BUMP_NORMALIZATION: f64 = 2.252_283_621_043_581;

/// Unit-mass bump supported on `(−1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        BUMP_NORMALIZATION * (-1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierConfig {
    /// Bump half-width is `1 / n_smooth`.
    pub n_smooth: usize,
    /// Uniform panels across each bump, in addition to data breakpoints.
    pub quad_points: usize,
}

impl MollifierConfig {
    pub fn new(n_smooth: usize) -> Self {
        Self { n_smooth, quad_points: 32 }
    }

    pub fn half_width(&self) -> f64 {
        1.0 / self.n_smooth as f64
    }
}

const RULE_POINTS: usize = 10;

struct Convolver<'a> {
    traj: &'a Trajectory,
    eps: f64,
    panels: usize,
    rule: GaussLegendre,
}

impl Convolver<'_> {
    fn kernel(&self, s: f64) -> f64 {
        bump(s / self.eps) / self.eps
    }

    fn interval_of(&self, s: f64) -> usize {
        let i = ((s - self.traj.t[0]) / self.traj.dt()).floor();
        (i.max(0.0) as usize).min(self.traj.steps() - 1)
    }

    /// Breakpoints on `[τ−ε, τ+ε]`: grid nodes plus uniform panels.
    fn pieces(&self, tau: f64) -> Vec<f64> {
        let (lo, hi) = (tau - self.eps, tau + self.eps);
        let mut pts: Vec<f64> = (0..=self.panels)
            .map(|p| lo + 2.0 * self.eps * p as f64 / self.panels as f64)
            .collect();
        pts.extend(self.traj.t.iter().copied().filter(|&t| t > lo && t < hi));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * self.eps);
        pts
    }

    /// Quadrature samples `(weight · δ_ε(τ − s), interval, θ)` of the
    /// convolution at `τ`, with `s = t_i + θ·dt`.
    fn samples(&self, tau: f64) -> Vec<(f64, usize, f64)> {
        let pts = self.pieces(tau);
        let dt = self.traj.dt();
        let mut out = Vec::with_capacity(pts.len() * self.rule.nodes.len());
        for w in pts.windows(2) {
            let (half, mid) = (0.5 * (w[1] - w[0]), 0.5 * (w[0] + w[1]));
            let interval = self.interval_of(mid);
            for (&node, &weight) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let s = mid + half * node;
                out.push((weight * half * self.kernel(tau - s), interval, (s - self.traj.t[interval]) / dt));
            }
        }
        out
    }

    fn state_at(&self, samples: &[(f64, usize, f64)]) -> DVector<f64> {
        let x = &self.traj.x;
        let mut acc = DVector::zeros(x[0].len());
        for &(w, i, theta) in samples {
            acc.axpy(w * (1.0 - theta), &x[i], 1.0);
            acc.axpy(w * theta, &x[i + 1], 1.0);
        }
        acc
    }

    fn piecewise_at(&self, samples: &[(f64, usize, f64)], data: &[DVector<f64>], dim: usize) -> DVector<f64> {
        let mut acc = DVector::zeros(dim);
        for &(w, i, _) in samples {
            acc.axpy(w, &data[i], 1.0);
        }
        acc
    }

    fn coenergy_at(&self, samples: &[(f64, usize, f64)], ham: &Hamiltonian) -> Result<DVector<f64>> {
        let x = &self.traj.x;
        let mut acc = DVector::zeros(x[0].len());
        for &(w, i, theta) in samples {
            let xs = &x[i] * (1.0 - theta) + &x[i + 1] * theta;
            acc.axpy(w, &ham.grad(&xs)?, 1.0);
        }
        Ok(acc)
    }
}

/// Output grid: original nodes `t_k` with `[t_k − ε, t_k + ε]` inside the data.
fn shrunken_nodes(traj: &Trajectory, eps: f64) -> Vec<usize> {
    let (t0, t1) = (traj.t[0], traj.t[traj.steps()]);
    let slack = 1e-12 * traj.dt();
    (0..traj.t.len())
        .filter(|&k| traj.t[k] - eps >= t0 - slack && traj.t[k] + eps <= t1 + slack)
        .collect()
}

fn convolver<'a>(traj: &'a Trajectory, cfg: &MollifierConfig) -> Result<(Convolver<'a>, Vec<usize>)> {
    if cfg.n_smooth == 0 || cfg.quad_points == 0 {
        return Err(PhsError::InvalidArgument("mollifier needs n_smooth > 0 and quad_points > 0".into()));
    }
    let eps = cfg.half_width();
    let nodes = shrunken_nodes(traj, eps);
    if nodes.len() < 2 {
        return Err(PhsError::InvalidArgument(format!(
            "trajectory on [{}, {}] too short for mollifier half-width {eps}",
            traj.t[0],
            traj.t[traj.steps()]
        )));
    }
    let conv = Convolver {
        traj,
        eps,
        panels: cfg.quad_points,
        rule: GaussLegendre::new(RULE_POINTS),
    };
    Ok((conv, nodes))
}

/// Convolves every channel with the scaled bump and samples the result on
/// the grid nodes of the shrunken interval. Interval data are sampled at the
/// new interval midpoints.
pub fn mollify(traj: &Trajectory, cfg: &MollifierConfig) -> Result<Trajectory> {
    let (conv, nodes) = convolver(traj, cfg)?;
    let dims = traj.dims();
    let dt = traj.dt();
    let t: Vec<f64> = nodes.iter().map(|&k| traj.t[k]).collect();
    let x: Vec<DVector<f64>> = t.par_iter().map(|&tau| conv.state_at(&conv.samples(tau))).collect();
    let data: Vec<[DVector<f64>; 4]> = t[..t.len() - 1]
        .par_iter()
        .map(|&tau| {
            let s = conv.samples(tau + 0.5 * dt);
            [
                conv.piecewise_at(&s, &traj.f_r, dims.n_r),
                conv.piecewise_at(&s, &traj.e_r, dims.n_r),
                conv.piecewise_at(&s, &traj.f_p, dims.n_p),
                conv.piecewise_at(&s, &traj.e_p, dims.n_p),
            ]
        })
        .collect();
    let (mut f_r, mut e_r, mut f_p, mut e_p) = (vec![], vec![], vec![], vec![]);
    for [a, b, c, d] in data {
        f_r.push(a);
        e_r.push(b);
        f_p.push(c);
        e_p.push(d);
    }
    Trajectory::new(t, x, f_r, e_r, f_p, e_p)
}

/// `δ_ε ∗ ∇H(x(·))` on the shrunken grid.
pub fn mollify_coenergy(sys: &PhsSystem, traj: &Trajectory, cfg: &MollifierConfig) -> Result<Vec<DVector<f64>>> {
    traj.check_dims(sys.dims())?;
    let (conv, nodes) = convolver(traj, cfg)?;
    nodes
        .par_iter()
        .map(|&k| conv.coenergy_at(&conv.samples(traj.t[k]), sys.hamiltonian()))
        .collect()
}

/// Mollified bond vectors at interior nodes of the shrunken grid: every
/// channel (including the co-energy `∇H(x)`) is convolved at the node, and
/// `ẋ` is the centered difference of the mollified state.
pub fn mollified_bonds(sys: &PhsSystem, traj: &Trajectory, cfg: &MollifierConfig) -> Result<Vec<(f64, BondVector)>> {
    traj.check_dims(sys.dims())?;
    let (conv, nodes) = convolver(traj, cfg)?;
    let dims = sys.dims();
    let dt = traj.dt();
    nodes[1..nodes.len() - 1]
        .par_iter()
        .map(|&k| {
            let tau = traj.t[k];
            let x_prev = conv.state_at(&conv.samples(tau - dt));
            let x_next = conv.state_at(&conv.samples(tau + dt));
            let xdot = (x_next - x_prev) / (2.0 * dt);
            let s = conv.samples(tau);
            let coenergy = conv.coenergy_at(&s, sys.hamiltonian())?;
            let f_r = conv.piecewise_at(&s, &traj.f_r, dims.n_r);
            let e_r = conv.piecewise_at(&s, &traj.e_r, dims.n_r);
            let f_p = conv.piecewise_at(&s, &traj.f_p, dims.n_p);
            let e_p = conv.piecewise_at(&s, &traj.e_p, dims.n_p);
            Ok((tau, sys.bond(&xdot, &coenergy, &f_r, &e_r, &f_p, &e_p)?))
        })
        .collect()
}
