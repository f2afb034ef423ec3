//! Certification of sampled trajectories: weak residuals, pointwise
//! defects, mollification and energy audits.

mod energy;
mod mollify;
mod strong;
mod weak;

pub use energy::{energy_report, EnergyReport, IntervalEnergy};
pub use mollify::{bump, mollified_bonds, mollify, mollify_coenergy, MollifierConfig, BUMP_NORMALIZATION};
pub use strong::{pointwise_defect, strong_report, StrongReport};
pub use weak::{weak_residual, WeakReport};
