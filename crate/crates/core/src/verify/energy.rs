use serde::Serialize;

use crate::error::Result;
use crate::system::{PhsSystem, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEnergy {
    pub t0: f64,
    pub t1: f64,
    pub delta_h: f64,
    /// `dt·⟨f_R, e_R⟩`, nonpositive for passive relations.
    pub dissipated: f64,
    /// `dt·⟨f_P, e_P⟩`.
    pub supplied: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub h_initial: f64,
    pub h_final: f64,
    pub total_delta_h: f64,
    pub total_dissipated: f64,
    pub total_supplied: f64,
    /// `|ΣΔH − Σdissipated − Σsupplied|`.
    pub cumulative_gap: f64,
    pub max_interval_gap: f64,
    /// Largest `dissipated` over all intervals.
    pub max_dissipated: f64,
    /// Largest `H(t_k) − H(t_0) − supplied on [t_0, t_k]` over all `k`.
    pub max_inequality_excess: f64,
    /// Largest single-step increase of `H`.
    pub max_h_increase: f64,
    /// `1 + max |H(t_k)|`.
    pub normalization: f64,
    #[serde(skip)]
    pub intervals: Vec<IntervalEnergy>,
    #[serde(skip)]
    pub h: Vec<f64>,
}

impl EnergyReport {
    /// Balance, dissipation sign and inequality all within `tol` relative
    /// to the energy scale.
    pub fn passes(&self, tol: f64) -> bool {
        let bound = tol * self.normalization;
        self.cumulative_gap <= bound
            && self.max_interval_gap <= bound
            && self.max_dissipated <= bound
            && self.max_inequality_excess <= bound
    }
}

pub fn energy_report(sys: &PhsSystem, traj: &Trajectory) -> Result<EnergyReport> {
    traj.check_dims(sys.dims())?;
    let ham = sys.hamiltonian();
    let h: Vec<f64> = traj.x.iter().map(|x| ham.eval(x)).collect::<Result<_>>()?;
    let dt = traj.dt();
    let mut intervals = Vec::with_capacity(traj.steps());
    let (mut sum_dh, mut sum_diss, mut sum_sup) = (0.0, 0.0, 0.0);
    let (mut max_gap, mut max_diss, mut max_excess, mut max_inc) =
        (0.0_f64, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..traj.steps() {
        let delta_h = h[i + 1] - h[i];
        let dissipated = dt * traj.f_r[i].dot(&traj.e_r[i]);
        let supplied = dt * traj.f_p[i].dot(&traj.e_p[i]);
        let gap = delta_h - dissipated - supplied;
        sum_dh += delta_h;
        sum_diss += dissipated;
        sum_sup += supplied;
        max_gap = max_gap.max(gap.abs());
        max_diss = max_diss.max(dissipated);
        max_excess = max_excess.max(h[i + 1] - h[0] - sum_sup);
        max_inc = max_inc.max(delta_h);
        intervals.push(IntervalEnergy {
            t0: traj.t[i],
            t1: traj.t[i + 1],
            delta_h,
            dissipated,
            supplied,
            gap,
        });
    }
    let normalization = 1.0 + h.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(EnergyReport {
        h_initial: h[0],
        h_final: h[h.len() - 1],
        total_delta_h: sum_dh,
        total_dissipated: sum_diss,
        total_supplied: sum_sup,
        cumulative_gap: (sum_dh - sum_diss - sum_sup).abs(),
        max_interval_gap: max_gap,
        max_dissipated: max_diss,
        max_inequality_excess: max_excess,
        max_h_increase: max_inc,
        normalization,
        intervals,
        h,
    })
}
