use rayon::prelude::*;

use super::{PivotKind, PivotMeta, PivotSample};
use crate::error::{Error, Result};
use crate::estimators::{ar1_lad, ar1_lse, weighted_median};
use crate::rand_weights::{fill_weights, resample_with_replacement, RngStream, WeightScheme};

/// Relative threshold below which a weighted denominator counts as zero.
const DENOMINATOR_GUARD: f64 = 1e-8;
/// Weight rows tried for one replicate before giving up.
const MAX_ATTEMPTS: usize = 1_000;

fn check_replicates(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidParameter("number of replicates must be positive".into()));
    }
    Ok(())
}

fn check_scheme(scheme: &WeightScheme, n: usize) -> Result<()> {
    if scheme.n != n - 1 {
        return Err(Error::InvalidParameter(format!(
            "weight rows must have one entry per summand ({}), scheme has n = {}",
            n - 1,
            scheme.n
        )));
    }
    Ok(())
}

/// Residuals `X_t - theta X_{t-1}`, `t = 2..n`, centered and scaled so that
/// their mean square is 1.
pub fn standardized_residuals(x: &[f64], theta: f64) -> Result<Vec<f64>> {
    if x.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "residual bootstrap needs at least 3 observations, got {}",
            x.len()
        )));
    }
    let mut z: Vec<f64> = x.windows(2).map(|w| w[1] - theta * w[0]).collect();
    let k = z.len() as f64;
    let mean = z.iter().sum::<f64>() / k;
    z.iter_mut().for_each(|v| *v -= mean);
    let rms = (z.iter().map(|v| v * v).sum::<f64>() / k).sqrt();
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(rms > 1e-12 * scale) {
        return Err(Error::Degenerate(
            "residuals are constant; nothing to resample".into(),
        ));
    }
    z.iter_mut().for_each(|v| *v /= rms);
    Ok(z)
}

/// Residual bootstrap of the least-squares estimate. Each replicate rebuilds
/// `X*_1 = Z*_1`, `X*_t = theta_hat X*_{t-1} + Z*_t` from resampled
/// standardized residuals and records `sqrt(n)(theta* - theta_hat)`.
pub fn ar1_residual_bootstrap(x: &[f64], b: usize, stream: &RngStream) -> Result<PivotSample> {
    check_replicates(b)?;
    let theta_hat = ar1_lse(x)?.value();
    let z = standardized_residuals(x, theta_hat)?;
    let n = x.len();
    let root_n = (n as f64).sqrt();
    let draws = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r as u64).rng();
            let zs = resample_with_replacement(&mut rng, &z, n)?;
            let mut xs = Vec::with_capacity(n);
            let mut prev = 0.0;
            for zt in zs {
                prev = theta_hat * prev + zt;
                xs.push(prev);
            }
            let theta_star = ar1_lse(&xs)?.value();
            Ok(vec![root_n * (theta_star - theta_hat)])
        })
        .collect::<Result<Vec<_>>>()?;
    PivotSample::new(
        PivotKind::ResidualBs,
        vec!["theta".into()],
        "sqrt(n)(theta* - theta_hat)",
        draws,
        PivotMeta::new(n, b),
    )
}

/// `sum w_t X_t X_{t-1} / sum w_t X_{t-1}^2`, or `None` when the denominator
/// is negligible relative to `sum X_{t-1}^2`.
pub fn weighted_lse_estimate(x: &[f64], w: &[f64]) -> Option<f64> {
    debug_assert_eq!(w.len() + 1, x.len());
    let (mut num, mut den, mut plain) = (0.0, 0.0, 0.0);
    for (pair, wt) in x.windows(2).zip(w) {
        let lag2 = pair[0] * pair[0];
        num += wt * pair[1] * pair[0];
        den += wt * lag2;
        plain += lag2;
    }
    if den.abs() < DENOMINATOR_GUARD * plain || !den.is_finite() {
        None
    } else {
        Some(num / den)
    }
}

/// Exact minimizer of `sum w_t |X_t - theta X_{t-1}|`, or `None` when a
/// weight is negative or no informative summand carries positive weight.
pub fn weighted_lad_estimate(x: &[f64], w: &[f64]) -> Option<f64> {
    debug_assert_eq!(w.len() + 1, x.len());
    if w.iter().any(|v| *v < 0.0) {
        return None;
    }
    let mut slopes = Vec::with_capacity(w.len());
    let mut weights = Vec::with_capacity(w.len());
    for (pair, wt) in x.windows(2).zip(w) {
        if pair[0] != 0.0 {
            slopes.push(pair[1] / pair[0]);
            weights.push(wt * pair[0].abs());
        }
    }
    weighted_median(&slopes, &weights).ok()
}

/// Runs `b` weighted replicates of `estimate`, redrawing undefined rows.
/// Returns the pivots and the number of redraws.
fn weighted_engine(
    engine: &'static str,
    x: &[f64],
    theta_hat: f64,
    scheme: &WeightScheme,
    b: usize,
    stream: &RngStream,
    estimate: fn(&[f64], &[f64]) -> Option<f64>,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let scale = (x.len() as f64).sqrt() / scheme.sigma_n();
    let per_replicate = (0..b)
        .into_par_iter()
        .map(|r| {
            let base = stream.child(r as u64);
            let mut w = Vec::with_capacity(scheme.n);
            for attempt in 0..MAX_ATTEMPTS {
                fill_weights(&mut base.child(attempt as u64).rng(), scheme, &mut w);
                if let Some(theta_star) = estimate(x, &w) {
                    return Ok((scale * (theta_star - theta_hat), attempt));
                }
            }
            Err(Error::Rejection {
                engine,
                rejected: MAX_ATTEMPTS,
                attempted: MAX_ATTEMPTS,
                reason: format!("no usable weight row for replicate {r}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rejected = per_replicate.iter().map(|(_, k)| k).sum();
    Ok((per_replicate.into_iter().map(|(v, _)| vec![v]).collect(), rejected))
}

/// Weighted bootstrap of the least-squares estimate with pivot
/// `sqrt(n)(theta* - theta_hat)/sigma_n`.
///
/// Rows whose weighted denominator `sum w_t X_{t-1}^2` falls below `1e-8`
/// times `sum X_{t-1}^2` in absolute value are redrawn; more than 1%
/// redraws is an error.
pub fn ar1_weighted_bootstrap(
    x: &[f64],
    scheme: &WeightScheme,
    b: usize,
    stream: &RngStream,
) -> Result<PivotSample> {
    check_replicates(b)?;
    let theta_hat = ar1_lse(x)?.value();
    check_scheme(scheme, x.len())?;
    let engine = "ar1_weighted_bootstrap";
    let (draws, rejected) =
        weighted_engine(engine, x, theta_hat, scheme, b, stream, weighted_lse_estimate)?;
    if rejected as f64 > 0.01 * (b + rejected) as f64 {
        return Err(Error::Rejection {
            engine,
            rejected,
            attempted: b + rejected,
            reason: "weighted denominator too close to zero".into(),
        });
    }
    let mut meta = PivotMeta::new(x.len(), b);
    meta.scheme = Some(scheme.label());
    meta.rejected = rejected;
    PivotSample::new(
        PivotKind::WeightedBs,
        vec!["theta".into()],
        "sqrt(n)(theta* - theta_hat)/sigma_n",
        draws,
        meta,
    )
}

/// Weighted bootstrap of the LAD estimate. Rows with a negative weight are
/// redrawn; more than half redrawn is an error.
pub fn ar1_weighted_lad_bootstrap(
    x: &[f64],
    scheme: &WeightScheme,
    b: usize,
    stream: &RngStream,
) -> Result<PivotSample> {
    check_replicates(b)?;
    let theta_hat = ar1_lad(x)?.value();
    check_scheme(scheme, x.len())?;
    let engine = "ar1_weighted_lad_bootstrap";
    let (draws, rejected) =
        weighted_engine(engine, x, theta_hat, scheme, b, stream, weighted_lad_estimate)
            .map_err(|e| match e {
                Error::Rejection { engine, rejected, attempted, reason } => Error::Rejection {
                    engine,
                    rejected,
                    attempted,
                    reason: format!("{reason}; use a non-negative weight scheme"),
                },
                e => e,
            })?;
    if rejected as f64 > 0.5 * (b + rejected) as f64 {
        return Err(Error::Rejection {
            engine,
            rejected,
            attempted: b + rejected,
            reason: "negative weights; use a non-negative weight scheme".into(),
        });
    }
    let mut meta = PivotMeta::new(x.len(), b);
    meta.scheme = Some(scheme.label());
    meta.rejected = rejected;
    PivotSample::new(
        PivotKind::WeightedBs,
        vec!["theta".into()],
        "sqrt(n)(theta* - theta_hat)/sigma_n",
        draws,
        meta,
    )
}
