use std::cmp::Ordering;

use super::EstimatorResult;
use crate::error::{Error, Result};

fn check_series(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "AR(1) estimation needs at least 2 observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn check_taus(x: &[f64], tau: &[f64]) -> Result<()> {
    if tau.len() != x.len() - 1 {
        return Err(Error::InvalidParameter(format!(
            "expected one tau per summand t = 2..n ({} values), got {}",
            x.len() - 1,
            tau.len()
        )));
    }
    if let Some(t) = tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "tau values must be positive, got {t}"
        )));
    }
    Ok(())
}

/// Weighted ratio `sum c_t X_t X_{t-1} / sum c_t X_{t-1}^2` with its weighted
/// residual sum of squares.
fn weighted_ratio(x: &[f64], coef: impl Fn(usize) -> f64) -> Result<EstimatorResult> {
    let (mut num, mut den) = (0.0, 0.0);
    for t in 1..x.len() {
        let c = coef(t - 1);
        num += c * x[t] * x[t - 1];
        den += c * x[t - 1] * x[t - 1];
    }
    if den <= 0.0 {
        return Err(Error::Degenerate(
            "all lagged observations are zero; the least-squares ratio is undefined".into(),
        ));
    }
    let theta = num / den;
    let rss = (1..x.len())
        .map(|t| coef(t - 1) * (x[t] - theta * x[t - 1]).powi(2))
        .sum();
    Ok(EstimatorResult::closed_form(theta, rss))
}

/// Least-squares estimate `sum X_t X_{t-1} / sum X_{t-1}^2`.
pub fn ar1_lse(x: &[f64]) -> Result<EstimatorResult> {
    check_series(x)?;
    weighted_ratio(x, |_| 1.0)
}

/// Weighted least squares with known scales; `tau[i]` is `tau_t` for the
/// summand `t = i + 2`.
pub fn ar1_wlse(x: &[f64], tau: &[f64]) -> Result<EstimatorResult> {
    check_series(x)?;
    check_taus(x, tau)?;
    weighted_ratio(x, |i| 1.0 / (tau[i] * tau[i]))
}

/// Weighted median: the smallest `v` among `values` such that the weight
/// strictly below `v` and the weight strictly above `v` are both at most
/// half the total. It minimizes `sum w_i |v_i - m|` over `m`.
///
/// Entries with zero weight never matter and are skipped.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN value in weighted median".into()));
    }
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Degenerate("weighted median with all weights zero".into()));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // Collapse equal values so ties are decided on whole atoms.
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (v, w) in pairs {
        match atoms.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => atoms.push((v, w)),
        }
    }
    // above[i]: weight strictly above atom i.
    let mut above = vec![0.0; atoms.len()];
    for i in (0..atoms.len() - 1).rev() {
        above[i] = above[i + 1] + atoms[i + 1].1;
    }
    let total = above[0] + atoms[0].1;
    let half = total / 2.0;
    let mut below = 0.0;
    for (i, &(v, w)) in atoms.iter().enumerate() {
        if below <= half && above[i] <= half {
            return Ok(v);
        }
        below += w;
    }
    // Rounding can leave every atom a hair above the threshold; fall back to
    // the atom where the cumulative weight first reaches half.
    let mut cum = 0.0;
    for &(v, w) in &atoms {
        cum += w;
        if cum >= half {
            return Ok(v);
        }
    }
    Ok(atoms[atoms.len() - 1].0)
}

/// `sum_{t>=2} c_t |X_t - theta X_{t-1}|`.
fn abs_objective(x: &[f64], theta: f64, coef: impl Fn(usize) -> f64) -> f64 {
    (1..x.len())
        .map(|t| coef(t - 1) * (x[t] - theta * x[t - 1]).abs())
        .sum()
}

/// LAD objective `sum |X_t - theta X_{t-1}|`.
pub fn lad_objective(x: &[f64], theta: f64) -> f64 {
    abs_objective(x, theta, |_| 1.0)
}

/// `sum w_t |X_t - theta X_{t-1}|` with `w[i]` attached to summand `t = i + 2`.
pub fn weighted_lad_objective(x: &[f64], w: &[f64], theta: f64) -> f64 {
    abs_objective(x, theta, |i| w[i])
}

/// Exact minimizer of `sum c_t |X_t - theta X_{t-1}|` as the weighted median
/// of the slopes `X_t / X_{t-1}` with weights `c_t |X_{t-1}|`.
pub(crate) fn lad_by_median(x: &[f64], coef: impl Fn(usize) -> f64) -> Result<f64> {
    let mut slopes = Vec::with_capacity(x.len() - 1);
    let mut weights = Vec::with_capacity(x.len() - 1);
    for t in 1..x.len() {
        if x[t - 1] != 0.0 {
            slopes.push(x[t] / x[t - 1]);
            weights.push(coef(t - 1) * x[t - 1].abs());
        }
    }
    if slopes.is_empty() {
        return Err(Error::Degenerate(
            "all lagged observations are zero; the LAD objective is flat".into(),
        ));
    }
    weighted_median(&slopes, &weights)
}

/// Least absolute deviations estimate.
pub fn ar1_lad(x: &[f64]) -> Result<EstimatorResult> {
    check_series(x)?;
    let theta = lad_by_median(x, |_| 1.0)?;
    Ok(EstimatorResult::closed_form(theta, lad_objective(x, theta)))
}

/// Scale-weighted LAD, minimizing `sum |X_t - theta X_{t-1}| / tau_t`.
pub fn ar1_wlad(x: &[f64], tau: &[f64]) -> Result<EstimatorResult> {
    check_series(x)?;
    check_taus(x, tau)?;
    let theta = lad_by_median(x, |i| 1.0 / tau[i])?;
    Ok(EstimatorResult::closed_form(
        theta,
        abs_objective(x, theta, |i| 1.0 / tau[i]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rand_weights::RngStream;
    use rand::Rng;

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while (b - a).abs() > 1e-13 * (1.0 + a.abs().max(b.abs())) {
            if f(c) <= f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        (a + b) / 2.0
    }

    #[test]
    fn lse_on_exact_recursions() {
        assert_eq!(ar1_lse(&[1.0, 0.5, 0.25, 0.125]).unwrap().value(), 0.5);
        assert_eq!(ar1_lse(&[1.0, -1.0, 1.0, -1.0]).unwrap().value(), -1.0);
        assert_eq!(ar1_lse(&[1.0, 0.5, 0.25]).unwrap().objective, 0.0);
    }

    #[test]
    fn lse_rejects_zero_lags() {
        assert!(matches!(ar1_lse(&[0.0, 0.0, 0.0]), Err(Error::Degenerate(_))));
        assert!(ar1_lse(&[1.0]).is_err());
    }

    #[test]
    fn wlse_with_constant_tau_is_lse() {
        let mut rng = RngStream::new(1).rng();
        let x: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.5).collect();
        let tau = vec![3.0; 39];
        let a = ar1_lse(&x).unwrap().value();
        let b = ar1_wlse(&x, &tau).unwrap().value();
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn wlse_on_noise_free_series_ignores_weights() {
        assert_eq!(ar1_wlse(&[1.0, 0.5, 0.25], &[1.0, 10.0]).unwrap().value(), 0.5);
        assert!(ar1_wlse(&[1.0, 0.5, 0.25], &[1.0, 0.0]).is_err());
        assert!(ar1_wlse(&[1.0, 0.5, 0.25], &[1.0]).is_err());
    }

    #[test]
    fn weighted_median_by_hand() {
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[1.0, 1.0, 3.0]).unwrap(), 3.0);
        assert_eq!(weighted_median(&[5.0], &[2.0]).unwrap(), 5.0);
        // Flat interval [1, 2]: the left endpoint wins.
        assert_eq!(weighted_median(&[2.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        // Zero-weight entries are ignored.
        assert_eq!(weighted_median(&[0.0, 4.0, 9.0], &[0.0, 1.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn weighted_median_errors() {
        assert!(matches!(
            weighted_median(&[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(weighted_median(&[1.0], &[-1.0]).is_err());
        assert!(weighted_median(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn lad_on_exact_recursion() {
        let r = ar1_lad(&[1.0, 0.5, 0.25, 0.125]).unwrap();
        assert_eq!(r.value(), 0.5);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn lad_matches_golden_section_on_small_fixture() {
        let x = [1.0, 1.0, -2.0, 1.0];
        let lad = ar1_lad(&x).unwrap();
        let g = golden_section(|t| lad_objective(&x, t), -5.0, 5.0);
        assert!((lad.objective - lad_objective(&x, g)).abs() < 1e-9);
        assert!((lad.value() - g).abs() < 1e-6);
    }

    #[test]
    fn lad_drops_zero_lags_and_rejects_all_zero() {
        let r = ar1_lad(&[0.0, 3.0, 1.5, 0.75]).unwrap();
        assert_eq!(r.value(), 0.5);
        assert!(ar1_lad(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn wlad_constant_tau_and_noise_free() {
        let mut rng = RngStream::new(2).rng();
        let x: Vec<f64> = (0..30).map(|_| rng.random::<f64>() - 0.5).collect();
        assert_eq!(
            ar1_wlad(&x, &vec![2.5; 29]).unwrap().value(),
            ar1_lad(&x).unwrap().value()
        );
        assert_eq!(ar1_wlad(&[1.0, -0.5, 0.25, -0.125], &[1.0, 7.0, 0.2]).unwrap().value(), -0.5);
    }

    #[test]
    fn wlad_is_locally_optimal() {
        let root = RngStream::new(3);
        for k in 0..50 {
            let mut rng = root.child(k).rng();
            let n = rng.random_range(5..60);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let tau: Vec<f64> = (1..n).map(|_| 0.2 + rng.random::<f64>() * 3.0).collect();
            let r = ar1_wlad(&x, &tau).unwrap();
            let f = |t: f64| abs_objective(&x, t, |i| 1.0 / tau[i]);
            assert!(r.objective <= f(r.value() + 1e-6));
            assert!(r.objective <= f(r.value() - 1e-6));
        }
    }
}
