use rand::Rng;
use rayon::prelude::*;

use super::{PivotKind, PivotMeta, PivotSample};
use crate::error::{Error, Result};
use crate::estimators::arch::ArchData;
use crate::estimators::{
    arch_fit, arch_fit_with, minimize_box_positive, ArchFitOptions, ArchVariant, EstimatorResult,
    SimplexOptions,
};
use crate::processes::{arch_recursion, sigma2_unchecked};
use crate::rand_weights::{generate_weights, RngStream, WeightScheme};

/// Solver starts per bootstrap refit (primary fits use the solver default).
pub const ARCH_BOOTSTRAP_RESTARTS: usize = 2;
/// Values generated and discarded before the `m` kept ones when rebuilding
/// a bootstrap ARCH series from a zero presample.
pub const MN_BURN_IN: usize = 50;
/// Largest tolerated fraction of replicates lost to failed refits.
const MAX_DROP_FRACTION: f64 = 0.05;

pub(crate) fn arch_param_names(p: usize) -> Vec<String> {
    std::iter::once("c0".to_string())
        .chain((1..=p).map(|i| format!("b{i}")))
        .collect()
}

fn refit_options(stream: &RngStream) -> SimplexOptions {
    SimplexOptions {
        restarts: ARCH_BOOTSTRAP_RESTARTS,
        seed: stream.seed(),
        ..SimplexOptions::default()
    }
}

/// `sqrt(mean(e^4) - mean(e^2)^2)` of the scaled residuals `e`.
pub fn kurtosis_scale(e: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::EmptyInput("no residuals"));
    }
    let k = e.len() as f64;
    let m2 = e.iter().map(|v| v * v).sum::<f64>() / k;
    let m4 = e.iter().map(|v| v.powi(4)).sum::<f64>() / k;
    let tau2 = m4 - m2 * m2;
    if !(tau2 > 0.0 && tau2.is_finite()) {
        return Err(Error::Degenerate(format!(
            "squared residuals have no spread (tau^2 = {tau2})"
        )));
    }
    Ok(tau2.sqrt())
}

fn scaled_residuals(theta: &[f64], x: &[f64]) -> Vec<f64> {
    let p = theta.len() - 1;
    sigma2_unchecked(theta[0], &theta[1..], x)
        .into_iter()
        .zip(&x[p..])
        .map(|(s2, xt)| xt / s2.sqrt())
        .collect()
}

/// Minimizer of the criterion with summand `t` weighted by `w[t - p - 1]`,
/// started from `init`.
pub fn arch_weighted_fit(
    x: &[f64],
    p: usize,
    variant: ArchVariant,
    w: &[f64],
    init: &[f64],
    opts: &SimplexOptions,
) -> Result<EstimatorResult> {
    if w.len() + p != x.len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} weights, got {}",
            x.len() - p,
            w.len()
        )));
    }
    if init.len() != p + 1 {
        return Err(Error::InvalidParameter(format!(
            "initial point has {} components, ARCH({p}) needs {}",
            init.len(),
            p + 1
        )));
    }
    let data = ArchData::new(x, p, variant)?;
    minimize_box_positive(|theta: &[f64]| data.eval(theta, Some(w)), init, opts)
}

fn check_drops(engine: &'static str, dropped: usize, b: usize) -> Result<()> {
    if dropped as f64 > MAX_DROP_FRACTION * b as f64 {
        return Err(Error::Rejection {
            engine,
            rejected: dropped,
            attempted: b,
            reason: "bootstrap refits failed".into(),
        });
    }
    Ok(())
}

/// Weighted bootstrap of an ARCH(`p`) fit with pivot
/// `sqrt(n)(theta* - theta_hat)/sigma_n` per parameter. Every replicate
/// refits warm-started at `theta_hat`.
pub fn arch_weighted_bootstrap(
    x: &[f64],
    p: usize,
    variant: ArchVariant,
    scheme: &WeightScheme,
    b: usize,
    stream: &RngStream,
) -> Result<PivotSample> {
    if b == 0 {
        return Err(Error::InvalidParameter("number of replicates must be positive".into()));
    }
    let n = x.len();
    if p == 0 || scheme.n + p != n {
        return Err(Error::InvalidParameter(format!(
            "weight rows must have n - p = {} entries, scheme has {}",
            n.saturating_sub(p),
            scheme.n
        )));
    }
    let theta_hat = arch_fit(x, p, variant)?.estimate;
    let scale = (n as f64).sqrt() / scheme.sigma_n();
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let base = stream.child(r as u64);
            let w = generate_weights(&mut base.child(0).rng(), scheme);
            let opts = refit_options(&base.child(1));
            arch_weighted_fit(x, p, variant, &w, &theta_hat, &opts)
                .ok()
                .map(|fit| {
                    fit.estimate
                        .iter()
                        .zip(&theta_hat)
                        .map(|(s, h)| scale * (s - h))
                        .collect()
                })
        })
        .collect();
    let dropped = results.iter().filter(|r| r.is_none()).count();
    check_drops("arch_weighted_bootstrap", dropped, b)?;
    let mut meta = PivotMeta::new(n, b);
    meta.scheme = Some(scheme.label());
    meta.dropped = dropped;
    PivotSample::new(
        PivotKind::WeightedBs,
        arch_param_names(p),
        format!("sqrt(n)(theta* - theta_hat)/sigma_n [{variant}]"),
        results.into_iter().flatten().collect(),
        meta,
    )
}

/// m-out-of-n residual bootstrap of the Gaussian quasi-likelihood fit.
///
/// Residuals `X_t / sigma_t(theta_hat)` are standardized to mean 0 and
/// variance 1 and resampled to drive the fitted recursion from a zero
/// presample; after [`MN_BURN_IN`] discarded values, `m` are kept and refit.
/// The pivot is `sqrt(m)(theta* - theta_hat)/tau*` per parameter, with
/// `tau*` the [`kurtosis_scale`] of the refit's scaled residuals.
pub fn arch_mn_residual_bootstrap(
    x: &[f64],
    p: usize,
    m: usize,
    b: usize,
    stream: &RngStream,
) -> Result<PivotSample> {
    if b == 0 {
        return Err(Error::InvalidParameter("number of replicates must be positive".into()));
    }
    let n = x.len();
    if m < p + crate::estimators::arch::MIN_EXCESS_OBS || m > n {
        return Err(Error::InvalidParameter(format!(
            "subsample length m = {m} must lie in [{}, {n}]",
            p + crate::estimators::arch::MIN_EXCESS_OBS
        )));
    }
    let theta_hat = arch_fit(x, p, ArchVariant::GaussianNll)?.estimate;
    let mut e = scaled_residuals(&theta_hat, x);
    kurtosis_scale(&e)?;
    let k = e.len() as f64;
    let mean = e.iter().sum::<f64>() / k;
    let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k).sqrt();
    e.iter_mut().for_each(|v| *v = (*v - mean) / sd);

    let root_m = (m as f64).sqrt();
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let base = stream.child(r as u64);
            let mut rng = base.child(0).rng();
            let xs = arch_recursion(theta_hat[0], &theta_hat[1..], MN_BURN_IN, m, || {
                e[rng.random_range(0..e.len())]
            });
            if xs.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let opts = ArchFitOptions {
                simplex: refit_options(&base.child(1)),
                init: Some(theta_hat.clone()),
            };
            let fit = arch_fit_with(&xs, p, ArchVariant::GaussianNll, &opts).ok()?;
            let tau = kurtosis_scale(&scaled_residuals(&fit.estimate, &xs)).ok()?;
            Some(
                fit.estimate
                    .iter()
                    .zip(&theta_hat)
                    .map(|(s, h)| root_m * (s - h) / tau)
                    .collect(),
            )
        })
        .collect();
    let dropped = results.iter().filter(|r| r.is_none()).count();
    check_drops("arch_mn_residual_bootstrap", dropped, b)?;
    let mut meta = PivotMeta::new(n, b);
    meta.m = Some(m);
    meta.dropped = dropped;
    PivotSample::new(
        PivotKind::MnResidualBs,
        arch_param_names(p),
        "sqrt(m)(theta* - theta_hat)/tau*",
        results.into_iter().flatten().collect(),
        meta,
    )
}

/// `sqrt(n)(theta_hat - truth)/tau_hat` for a Gaussian quasi-likelihood fit,
/// the Monte-Carlo counterpart of [`arch_mn_residual_bootstrap`].
pub(crate) fn studentized_fit_error(
    x: &[f64],
    fit: &[f64],
    truth: &[f64],
) -> Result<Vec<f64>> {
    let tau = kurtosis_scale(&scaled_residuals(fit, x))?;
    let root_n = (x.len() as f64).sqrt();
    Ok(fit.iter().zip(truth).map(|(f, t)| root_n * (f - t) / tau).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::arch_objective;
    use crate::processes::{simulate_arch, ArchParams, ArchSpec, DEFAULT_ARCH_BURN_IN};
    use crate::rand_weights::ErrorDist;

    fn series(n: usize, b1: f64, seed: u64) -> Vec<f64> {
        let spec = ArchSpec {
            c0: 1.0,
            b: vec![b1],
            error: ErrorDist::StandardNormal,
        };
        simulate_arch(&spec, n, DEFAULT_ARCH_BURN_IN, &RngStream::new(seed))
            .unwrap()
            .values()
            .to_vec()
    }

    #[test]
    fn unit_weights_reproduce_the_fit() {
        let x = series(100, 0.5, 1);
        let scheme = WeightScheme::unit(99).unwrap();
        let s = arch_weighted_bootstrap(&x, 1, ArchVariant::GaussianNll, &scheme, 5, &RngStream::new(2))
            .unwrap();
        for v in s.draws().iter().flatten() {
            assert!(v.abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn replicate_objective_does_not_exceed_warm_start() {
        let x = series(100, 0.5, 3);
        let theta_hat = arch_fit(&x, 1, ArchVariant::GaussianNll).unwrap().estimate;
        let scheme = WeightScheme::iid_normal(99, 1.0).unwrap();
        let data = ArchData::new(&x, 1, ArchVariant::GaussianNll).unwrap();
        let mut rng = RngStream::new(4).rng();
        for r in 0..10 {
            let w = generate_weights(&mut rng, &scheme);
            let opts = refit_options(&RngStream::new(r));
            let fit = arch_weighted_fit(&x, 1, ArchVariant::GaussianNll, &w, &theta_hat, &opts).unwrap();
            assert!(data.eval(&fit.estimate, Some(&w)) <= data.eval(&theta_hat, Some(&w)));
        }
    }

    #[test]
    fn weighted_fit_with_unit_weights_matches_objective() {
        let x = series(60, 0.3, 5);
        let w = vec![1.0; 59];
        let theta = [0.9, 0.2];
        let data = ArchData::new(&x, 1, ArchVariant::Lade2).unwrap();
        let direct = arch_objective(&ArchParams::from_slice(&theta).unwrap(), &x, ArchVariant::Lade2).unwrap();
        assert!((data.eval(&theta, Some(&w)) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn mn_bootstrap_shape_and_determinism() {
        let x = series(100, 0.5, 6);
        let a = arch_mn_residual_bootstrap(&x, 1, 50, 20, &RngStream::new(7)).unwrap();
        let b = arch_mn_residual_bootstrap(&x, 1, 50, 20, &RngStream::new(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.param_names, vec!["c0", "b1"]);
        assert_eq!(a.meta.m, Some(50));
        assert_eq!(a.len() + a.meta.dropped, 20);
    }

    #[test]
    fn mn_bootstrap_validates_m() {
        let x = series(100, 0.5, 8);
        assert!(arch_mn_residual_bootstrap(&x, 1, 10, 5, &RngStream::new(1)).is_err());
        assert!(arch_mn_residual_bootstrap(&x, 1, 101, 5, &RngStream::new(1)).is_err());
    }

    #[test]
    fn white_noise_pivot_for_b1_is_centered() {
        let x = series(400, 0.0, 9);
        let s = arch_mn_residual_bootstrap(&x, 1, 400, 100, &RngStream::new(10)).unwrap();
        let hat = arch_fit(&x, 1, ArchVariant::GaussianNll).unwrap().estimate;
        // The fitted b1 sits at or near the boundary, so the pivot is
        // one-sided; its spread stays on the root-n scale.
        let col = s.column(1);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 2.0, "mean {mean}, fit {hat:?}");
    }

    #[test]
    fn kurtosis_scale_of_gaussian_residuals() {
        let mut rng = RngStream::new(11).rng();
        let e = ErrorDist::StandardNormal.sample_n(&mut rng, 100_000);
        let t = kurtosis_scale(&e).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 0.03, "{t}");
        assert!(kurtosis_scale(&[1.0, -1.0, 1.0]).is_err());
    }
}
