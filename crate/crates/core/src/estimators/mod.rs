//! Point estimators and their limit laws.

mod ar1;
pub(crate) mod arch;
mod limits;
mod simplex;

use serde::Serialize;

pub use ar1::{
    ar1_lad, ar1_lse, ar1_wlad, ar1_wlse, lad_objective, weighted_lad_objective, weighted_median,
};
pub use arch::{
    arch_fit, arch_fit_with, arch_objective, arch_terms, default_arch_init, ArchFitOptions,
    ArchVariant,
};
pub use limits::{asymptotic_variance, AsymptoticLaw, LawSource, LimitModel, CESARO_HORIZON};
pub use simplex::{minimize_box_positive, minimize_box_positive_traced, SimplexOptions};

/// Outcome of any estimator in this crate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub estimate: Vec<f64>,
    /// Objective evaluated at `estimate`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl EstimatorResult {
    pub(crate) fn closed_form(estimate: f64, objective: f64) -> Self {
        Self {
            estimate: vec![estimate],
            objective,
            converged: true,
            iterations: 0,
            restarts_used: 0,
        }
    }

    /// First component; the whole estimate for scalar estimators.
    pub fn value(&self) -> f64 {
        self.estimate[0]
    }
}
