use serde::Serialize;

use crate::error::{Error, Result};
use crate::processes::TauSchedule;
use crate::rand_weights::ErrorDist;

/// Horizon at which Cesaro averages over a tau schedule are evaluated.
pub const CESARO_HORIZON: usize = 1_000_000;

/// Models whose root-n limit law is available in closed or numerically
/// evaluated form.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitModel {
    /// Least squares under homoscedastic AR(1).
    Lse { theta: f64 },
    /// Least absolute deviations under homoscedastic AR(1), innovations
    /// `sigma * error`.
    Lad {
        theta: f64,
        sigma: f64,
        error: ErrorDist,
    },
    /// Weighted least squares (weights `1/tau_t^2`) under a tau schedule.
    HeteroWlse { theta: f64, tau: TauSchedule },
    /// Unweighted least squares under a tau schedule.
    HeteroLse { theta: f64, tau: TauSchedule },
    /// Weighted-bootstrap least squares under the alternating two-period
    /// schedule.
    TwoPeriodWeightedBootstrap {
        theta: f64,
        sigma1_sq: f64,
        sigma2_sq: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSource {
    LseStationary,
    LadStationary,
    WlseHeteroscedastic,
    LseHeteroscedastic,
    WeightedBootstrapTwoPeriod,
}

/// Centered normal limit of `sqrt(n) (estimate - theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLaw {
    pub variance: f64,
    pub rate: &'static str,
    pub source: LawSource,
    /// True when the variance comes from a finite-horizon Cesaro average.
    pub approximate: bool,
}

impl AsymptoticLaw {
    fn exact(variance: f64, source: LawSource) -> Self {
        Self {
            variance,
            rate: "sqrt(n)",
            source,
            approximate: false,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "limit laws need |theta| < 1, got {theta}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Cesaro sums `(1/n) sum_{t=2..n} tau_t^k E X_{t-1}^2` for `k = -2, 2` and
/// `(1/n) sum E X_{t-1}^2`, with `E X_1^2 = tau_1^2 / (1 - theta^2)`.
struct CesaroSums {
    inv_weighted: f64,
    weighted: f64,
    plain: f64,
}

fn cesaro_sums(theta: f64, tau: &TauSchedule) -> Result<CesaroSums> {
    let n = match tau {
        TauSchedule::Explicit(v) => v.len(),
        _ => CESARO_HORIZON,
    };
    if n < 2 {
        return Err(Error::InvalidParameter(
            "tau schedule must cover at least two time points".into(),
        ));
    }
    let theta2 = theta * theta;
    let tau1 = tau.tau(1)?;
    let mut ex2 = tau1 * tau1 / (1.0 - theta2);
    let (mut inv_weighted, mut weighted, mut plain) = (0.0, 0.0, 0.0);
    for t in 2..=n {
        let tau2 = tau.tau(t)?.powi(2);
        inv_weighted += ex2 / tau2;
        weighted += ex2 * tau2;
        plain += ex2;
        ex2 = theta2 * ex2 + tau2;
    }
    let nf = n as f64;
    Ok(CesaroSums {
        inv_weighted: inv_weighted / nf,
        weighted: weighted / nf,
        plain: plain / nf,
    })
}

/// Variance of the limit law of `model`.
///
/// The heteroscedastic forms divide by `theta^2` in their textbook
/// statement and are only claimed for `theta != 0`; they are rejected there.
pub fn asymptotic_variance(model: &LimitModel) -> Result<AsymptoticLaw> {
    match model {
        LimitModel::Lse { theta } => {
            check_theta(*theta)?;
            Ok(AsymptoticLaw::exact(1.0 - theta * theta, LawSource::LseStationary))
        }
        LimitModel::Lad {
            theta,
            sigma,
            error,
        } => {
            check_theta(*theta)?;
            check_positive("sigma", *sigma)?;
            // f_Z(0) = f_e(0) / sigma and E X^2 = sigma^2 / (1 - theta^2): sigma cancels.
            let f0 = error.density_at_zero();
            let variance = (1.0 - theta * theta) / (4.0 * f0 * f0);
            Ok(AsymptoticLaw::exact(variance, LawSource::LadStationary))
        }
        LimitModel::HeteroWlse { theta, tau } | LimitModel::HeteroLse { theta, tau } => {
            check_theta(*theta)?;
            if *theta == 0.0 {
                return Err(Error::InvalidParameter(
                    "heteroscedastic limit laws require theta != 0".into(),
                ));
            }
            let s = cesaro_sums(*theta, tau)?;
            let (variance, source) = match model {
                LimitModel::HeteroWlse { .. } => {
                    (1.0 / s.inv_weighted, LawSource::WlseHeteroscedastic)
                }
                _ => (s.weighted / (s.plain * s.plain), LawSource::LseHeteroscedastic),
            };
            Ok(AsymptoticLaw {
                variance,
                rate: "sqrt(n)",
                source,
                approximate: true,
            })
        }
        LimitModel::TwoPeriodWeightedBootstrap {
            theta,
            sigma1_sq,
            sigma2_sq,
        } => {
            check_theta(*theta)?;
            check_positive("sigma1_sq", *sigma1_sq)?;
            check_positive("sigma2_sq", *sigma2_sq)?;
            let t2 = theta * theta;
            let (a, b) = (*sigma1_sq, *sigma2_sq);
            let variance = 4.0 * (1.0 - t2) / (1.0 + t2) * (a * b + t2 * (a * a + b * b) / 2.0)
                / ((a + b) * (a + b));
            Ok(AsymptoticLaw::exact(
                variance,
                LawSource::WeightedBootstrapTwoPeriod,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(m: LimitModel) -> f64 {
        asymptotic_variance(&m).unwrap().variance
    }

    #[test]
    fn lse_variance() {
        assert!((var(LimitModel::Lse { theta: 0.5 }) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn lad_variance_normal() {
        let v = var(LimitModel::Lad {
            theta: 0.5,
            sigma: 1.0,
            error: ErrorDist::StandardNormal,
        });
        assert!((v - std::f64::consts::PI * 0.75 / 2.0).abs() < 1e-12);
        assert!((v - 1.17810).abs() < 1e-5);
    }

    #[test]
    fn lad_variance_laplace_is_smaller() {
        let v = var(LimitModel::Lad {
            theta: 0.5,
            sigma: 2.0,
            error: ErrorDist::DoubleExponential,
        });
        // f(0) = 1/sqrt(2): variance (1 - theta^2) / 2.
        assert!((v - 0.375).abs() < 1e-12);
    }

    #[test]
    fn two_period_bootstrap_variance() {
        let v = var(LimitModel::TwoPeriodWeightedBootstrap {
            theta: 0.5,
            sigma1_sq: 1.0,
            sigma2_sq: 2.0,
        });
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_schedule_reduces_to_lse() {
        for m in [
            LimitModel::HeteroWlse {
                theta: 0.5,
                tau: TauSchedule::Constant(3.0),
            },
            LimitModel::HeteroLse {
                theta: 0.5,
                tau: TauSchedule::Constant(3.0),
            },
        ] {
            let v = var(m);
            assert!((v - 0.75).abs() < 1e-5, "{v}");
        }
    }

    #[test]
    fn weighting_helps_under_heteroscedasticity() {
        let tau = TauSchedule::TwoPeriod {
            sigma1_sq: 1.0,
            sigma2_sq: 10.0,
        };
        let w = var(LimitModel::HeteroWlse {
            theta: 0.5,
            tau: tau.clone(),
        });
        let l = var(LimitModel::HeteroLse { theta: 0.5, tau });
        assert!(w < l, "{w} vs {l}");
    }

    #[test]
    fn zero_theta_is_outside_hypotheses() {
        let m = LimitModel::HeteroWlse {
            theta: 0.0,
            tau: TauSchedule::Constant(1.0),
        };
        assert!(asymptotic_variance(&m).is_err());
        assert!(asymptotic_variance(&LimitModel::Lse { theta: 1.0 }).is_err());
    }
}
