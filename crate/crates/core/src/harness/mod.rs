//! Config-driven Monte-Carlo experiments and their reports.

mod config;
mod experiments;
mod report;

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{Ar1Estimator, ExperimentConfig, ExperimentKind, ModelParams, WeightLaw};
pub use report::{emit_report, fmt_sig6, Cell, Exclusion, ExperimentReport, ReportFormat, Table};

/// Estimates with `b_1` below this are left out of [`average_absolute_error`].
pub const MIN_B1: f64 = 1e-6;

/// Mean of `|c0_hat/b1_hat - c0/b1|` over the included estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsoluteErrorSummary {
    pub value: f64,
    pub included: usize,
    /// Estimates with `b1_hat < MIN_B1`.
    pub excluded: usize,
}

/// Average of `|c0_hat/b1_hat - c0/b1|` over estimates `[c0_hat, b1_hat, ...]`.
pub fn average_absolute_error(estimates: &[Vec<f64>], truth: (f64, f64)) -> Result<AbsoluteErrorSummary> {
    if !(truth.1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "true b1 must be positive, got {}",
            truth.1
        )));
    }
    let target = truth.0 / truth.1;
    let mut sum = 0.0;
    let mut included = 0;
    for e in estimates {
        if e.len() < 2 {
            return Err(Error::InvalidParameter("estimates need c0 and b1".into()));
        }
        if e[1] >= MIN_B1 {
            sum += (e[0] / e[1] - target).abs();
            included += 1;
        }
    }
    if included == 0 {
        return Err(Error::Degenerate(format!(
            "all {} estimates have b1 below {MIN_B1}",
            estimates.len()
        )));
    }
    Ok(AbsoluteErrorSummary {
        value: sum / included as f64,
        included,
        excluded: estimates.len() - included,
    })
}

/// Runs `config` on `threads` workers (0 picks the machine default). The
/// numbers produced do not depend on `threads`.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let mut report = pool.install(|| experiments::run(config))?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_error_by_hand() {
        let s = average_absolute_error(&[vec![3.0, 1.0]], (2.0, 1.0)).unwrap();
        assert_eq!(s.value, 1.0);
        let s = average_absolute_error(&[vec![2.0, 1.0], vec![1.0, 0.5]], (2.0, 1.0)).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn tiny_b1_is_excluded_and_counted() {
        let s = average_absolute_error(&[vec![3.0, 1.0], vec![1.0, 1e-9]], (2.0, 1.0)).unwrap();
        assert_eq!((s.value, s.included, s.excluded), (1.0, 1, 1));
        assert!(average_absolute_error(&[vec![1.0, 0.0]], (2.0, 1.0)).is_err());
    }
}
