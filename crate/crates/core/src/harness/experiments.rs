use rayon::prelude::*;

use super::config::{Ar1Estimator, ExperimentConfig, ExperimentKind};
use super::report::{Cell, Exclusion, ExperimentReport, Table};
use super::average_absolute_error;
use crate::bootstrap::{
    ar1_residual_bootstrap, ar1_weighted_bootstrap, ar1_weighted_lad_bootstrap,
    arch_mn_residual_bootstrap, arch_weighted_bootstrap, studentized_fit_error, PivotKind,
    PivotMeta, PivotSample,
};
use crate::error::{Error, Result};
use crate::estimators::{
    ar1_lad, ar1_lse, ar1_wlad, ar1_wlse, arch_fit, asymptotic_variance, ArchVariant,
    LimitModel,
};
use crate::processes::{
    simulate_ar1, simulate_arch, simulate_hetero_ar1, Ar1Spec, ArchSpec, HeteroAr1Spec, Series,
    TauSchedule, DEFAULT_ARCH_BURN_IN,
};
use crate::rand_weights::{ErrorDist, RngStream};
use crate::stats::{kde_gaussian, ks_two_sample, moment_summary};

/// Grid points of every emitted density curve.
const DENSITY_GRID: usize = 128;

// Child indices below the experiment stream.
const MC_STREAM: u64 = 1;
const FIXED_SERIES_STREAM: u64 = 2;
const BOOTSTRAP_STREAM: u64 = 3;

pub(super) fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let root = RngStream::new(config.master_seed).child(config.experiment.stream_index());
    let mut b = Builder::new(config);
    match config.experiment {
        ExperimentKind::Ar1BootstrapComparison => ar1_bootstrap_comparison(config, &root, &mut b)?,
        ExperimentKind::HeteroBootstrapComparison => hetero_bootstrap_comparison(config, &root, &mut b)?,
        ExperimentKind::ArchEstimatorComparison => arch_estimator_comparison(config, &root, &mut b)?,
        ExperimentKind::ArchBootstrapConsistency => arch_bootstrap_consistency(config, &root, &mut b)?,
        ExperimentKind::LimitLawCheck => limit_law_check(config, &root, &mut b)?,
    }
    Ok(b.finish())
}

struct Builder<'a> {
    config: &'a ExperimentConfig,
    ks: Table,
    moments: Table,
    extra: Vec<Table>,
    pivots: Vec<(String, PivotSample)>,
    densities: Vec<(String, crate::stats::DensityCurve)>,
    exclusions: Vec<Exclusion>,
    warnings: Vec<String>,
}

impl<'a> Builder<'a> {
    fn new(config: &'a ExperimentConfig) -> Self {
        Self {
            config,
            ks: Table::new(
                "ks",
                &[
                    "estimator", "method", "param", "sample_a", "sample_b", "n1", "n2", "d_stat",
                    "p_value",
                ],
            ),
            moments: Table::new(
                "moments",
                &["sample", "param", "draws", "mean", "var", "skew", "kurt", "q025", "q500", "q975"],
            ),
            extra: Vec::new(),
            pivots: Vec::new(),
            densities: Vec::new(),
            exclusions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Records a pivot sample with its moment rows, density curves and
    /// exclusion counts.
    fn add_sample(&mut self, stem: &str, sample: PivotSample) -> Result<()> {
        for (j, param) in sample.param_names.iter().enumerate() {
            let col = sample.column(j);
            if col.len() < 2 {
                self.warnings.push(format!(
                    "{stem}/{param}: only {} draw; moments and density skipped",
                    col.len()
                ));
                continue;
            }
            let m = moment_summary(&col)?;
            self.moments.push(vec![
                stem.into(),
                param.as_str().into(),
                m.n.into(),
                m.mean.into(),
                m.var.into(),
                m.skew.into(),
                m.kurt.into(),
                m.q025.into(),
                m.q500.into(),
                m.q975.into(),
            ]);
            match kde_gaussian(&col, DENSITY_GRID) {
                Ok(curve) => self.densities.push((format!("{stem}_{param}"), curve)),
                Err(e) => self.warnings.push(format!("{stem}/{param}: density skipped ({e})")),
            }
        }
        let meta = &sample.meta;
        if sample.kind == PivotKind::WeightedBs {
            self.exclusions.push(Exclusion {
                context: stem.to_string(),
                count: meta.rejected,
                reason: "weight rows redrawn".into(),
            });
        }
        self.exclusions.push(Exclusion {
            context: stem.to_string(),
            count: meta.dropped,
            reason: if sample.kind == PivotKind::MonteCarlo {
                "failed fits".into()
            } else {
                "failed refits".into()
            },
        });
        self.pivots.push((stem.to_string(), sample));
        Ok(())
    }

    fn sample(&self, stem: &str) -> &PivotSample {
        self.pivots
            .iter()
            .find(|(s, _)| s == stem)
            .map(|(_, p)| p)
            .expect("sample recorded before comparison")
    }

    /// KS comparison of every parameter of two recorded samples.
    fn compare(&mut self, estimator: &str, method: &str, a: &str, b: &str) -> Result<()> {
        let (sa, sb) = (self.sample(a), self.sample(b));
        let mut rows = Vec::new();
        for (j, param) in sa.param_names.iter().enumerate() {
            let r = ks_two_sample(&sa.column(j), &sb.column(j))?;
            rows.push(vec![
                estimator.into(),
                method.into(),
                param.as_str().into(),
                a.into(),
                b.into(),
                r.n1.into(),
                r.n2.into(),
                r.d_stat.into(),
                r.p_value.into(),
            ]);
        }
        rows.into_iter().for_each(|r| self.ks.push(r));
        Ok(())
    }

    fn finish(self) -> ExperimentReport {
        let mut tables = vec![self.ks, self.moments];
        tables.extend(self.extra);
        tables.retain(|t| !t.rows.is_empty());
        let mut warnings = self.warnings;
        let single_b = self.config.b == 1 && self.config.experiment.uses_bootstrap();
        if self.config.mc_replicates == 1 || single_b {
            warnings.insert(0, "single-draw samples requested; summaries are degenerate".into());
        }
        ExperimentReport {
            config: self.config.clone(),
            tables,
            pivots: self.pivots,
            densities: self.densities,
            exclusions: self.exclusions,
            warnings,
            wall_time_secs: 0.0,
        }
    }
}

/// `f` on `count` child streams, collected in index order.
fn monte_carlo<T: Send>(count: usize, stream: &RngStream, f: impl Fn(&RngStream) -> T + Sync) -> Vec<T> {
    (0..count)
        .into_par_iter()
        .map(|r| f(&stream.child(r as u64)))
        .collect()
}

fn with_context<T>(r: Result<T>, what: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{}: {m}", what())),
        Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", what())),
        Error::Solver(m) => Error::Solver(format!("{}: {m}", what())),
        other => other,
    })
}

type Simulator<'s> = dyn Fn(&RngStream) -> Result<Series> + Sync + 's;
type Engine<'s> = dyn Fn(&[f64], usize, &RngStream) -> Result<PivotSample> + Sync + 's;

/// Runs a bootstrap engine on the fixed series, or on a fresh series per
/// replicate when the config asks for it.
fn bootstrap_sample(
    config: &ExperimentConfig,
    root: &RngStream,
    engine_index: u64,
    simulate: &Simulator<'_>,
    engine: &Engine<'_>,
) -> Result<PivotSample> {
    let boot = root.child(BOOTSTRAP_STREAM).child(engine_index);
    let fixed = root.child(FIXED_SERIES_STREAM);
    if !config.fresh_series_per_replicate {
        let series = simulate(&fixed)?;
        return engine(series.values(), config.b, &boot);
    }
    let parts = (0..config.b)
        .into_par_iter()
        .map(|r| {
            let series = simulate(&fixed.child(r as u64))?;
            engine(series.values(), 1, &boot.child(r as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let first = &parts[0];
    let mut meta = PivotMeta::new(config.n, config.b);
    meta.m = first.meta.m;
    meta.scheme = first.meta.scheme.clone();
    meta.rejected = parts.iter().map(|p| p.meta.rejected).sum();
    meta.dropped = parts.iter().map(|p| p.meta.dropped).sum();
    PivotSample::new(
        first.kind,
        first.param_names.clone(),
        format!("{} [fresh series per replicate]", first.pivot_def),
        parts.iter().flat_map(|p| p.draws().to_vec()).collect(),
        meta,
    )
}

fn ar1_estimate(est: Ar1Estimator, x: &[f64], taus: &[f64]) -> Result<f64> {
    Ok(match est {
        Ar1Estimator::Lse => ar1_lse(x)?.value(),
        Ar1Estimator::Lad => ar1_lad(x)?.value(),
        Ar1Estimator::Wlse => ar1_wlse(x, taus)?.value(),
        Ar1Estimator::Wlad => ar1_wlad(x, taus)?.value(),
    })
}

/// Monte-Carlo sample of `sqrt(n)(theta_hat - theta)`.
fn ar1_mc_pivots(
    config: &ExperimentConfig,
    root: &RngStream,
    est: Ar1Estimator,
    theta: f64,
    taus: &[f64],
    simulate: &Simulator<'_>,
) -> Result<PivotSample> {
    let root_n = (config.n as f64).sqrt();
    let draws = monte_carlo(config.mc_replicates, &root.child(MC_STREAM), |s| {
        let series = simulate(s)?;
        Ok(vec![root_n * (ar1_estimate(est, series.values(), taus)? - theta)])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>();
    let draws = with_context(draws, || format!("Monte-Carlo {} replicate", est.name()))?;
    PivotSample::new(
        PivotKind::MonteCarlo,
        vec!["theta".into()],
        "sqrt(n)(theta_hat - theta)",
        draws,
        PivotMeta::new(config.n, config.mc_replicates),
    )
}

fn limits_table() -> Table {
    Table::new("limits", &["sample", "param", "limit_var", "source", "empirical_var"])
}

fn limit_row(table: &mut Table, stem: &str, model: LimitModel, sample: &PivotSample) -> Result<()> {
    let law = asymptotic_variance(&model)?;
    let col = sample.column(0);
    let empirical = if col.len() >= 2 {
        Some(moment_summary(&col)?.var)
    } else {
        None
    };
    let source = serde_json::to_value(law.source)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    table.push(vec![
        stem.into(),
        "theta".into(),
        law.variance.into(),
        source.into(),
        empirical.into(),
    ]);
    Ok(())
}

fn ar1_bootstrap_comparison(config: &ExperimentConfig, root: &RngStream, b: &mut Builder<'_>) -> Result<()> {
    let theta = config.theta()?;
    let spec = Ar1Spec {
        theta,
        sigma: config.sigma(),
        error: config.error(),
    };
    let n = config.n;
    let simulate = move |s: &RngStream| simulate_ar1(&spec, n, s);
    let scheme = config.weight_scheme(n - 1)?;
    let mut limits = limits_table();
    for est in config.ar1_estimators()? {
        let mc_stem = format!("mc_{}", est.name());
        let mc = ar1_mc_pivots(config, root, est, theta, &[], &simulate)?;
        let model = match est {
            Ar1Estimator::Lad => LimitModel::Lad {
                theta,
                sigma: spec.sigma,
                error: spec.error,
            },
            _ => LimitModel::Lse { theta },
        };
        limit_row(&mut limits, &mc_stem, model, &mc)?;
        b.add_sample(&mc_stem, mc)?;
        match est {
            Ar1Estimator::Lse => {
                let rb = bootstrap_sample(config, root, 0, &simulate, &|x, reps, s| {
                    ar1_residual_bootstrap(x, reps, s)
                })?;
                b.add_sample("rb_lse", rb)?;
                b.compare("lse", "rb", "rb_lse", &mc_stem)?;
                let wb = bootstrap_sample(config, root, 1, &simulate, &|x, reps, s| {
                    ar1_weighted_bootstrap(x, &scheme, reps, s)
                })?;
                b.add_sample("wb_lse", wb)?;
                b.compare("lse", "wb", "wb_lse", &mc_stem)?;
            }
            _ => {
                let wb = bootstrap_sample(config, root, 2, &simulate, &|x, reps, s| {
                    ar1_weighted_lad_bootstrap(x, &scheme, reps, s)
                })?;
                b.add_sample("wb_lad", wb)?;
                b.compare("lad", "wb", "wb_lad", &mc_stem)?;
            }
        }
    }
    b.extra.push(limits);
    Ok(())
}

fn hetero_bootstrap_comparison(config: &ExperimentConfig, root: &RngStream, b: &mut Builder<'_>) -> Result<()> {
    let theta = config.theta()?;
    let (sigma1_sq, sigma2_sq) = config.two_period()?;
    let tau = TauSchedule::TwoPeriod {
        sigma1_sq,
        sigma2_sq,
    };
    let spec = HeteroAr1Spec {
        theta,
        tau: tau.clone(),
        error: config.error(),
    };
    let n = config.n;
    let simulate = |s: &RngStream| simulate_hetero_ar1(&spec, n, s);
    let scheme = config.weight_scheme(n - 1)?;

    let mc = ar1_mc_pivots(config, root, Ar1Estimator::Lse, theta, &[], &simulate)?;
    let rb = bootstrap_sample(config, root, 0, &simulate, &|x, reps, s| {
        ar1_residual_bootstrap(x, reps, s)
    })?;
    let wb = bootstrap_sample(config, root, 1, &simulate, &|x, reps, s| {
        ar1_weighted_bootstrap(x, &scheme, reps, s)
    })?;
    let mut limits = limits_table();
    limit_row(&mut limits, "mc_lse", LimitModel::HeteroLse { theta, tau }, &mc)?;
    limit_row(
        &mut limits,
        "wb_lse",
        LimitModel::TwoPeriodWeightedBootstrap {
            theta,
            sigma1_sq,
            sigma2_sq,
        },
        &wb,
    )?;
    b.add_sample("mc_lse", mc)?;
    b.add_sample("rb_lse", rb)?;
    b.add_sample("wb_lse", wb)?;
    b.compare("lse", "rb", "rb_lse", "mc_lse")?;
    b.compare("lse", "wb", "wb_lse", "mc_lse")?;
    b.extra.push(limits);
    Ok(())
}

/// Parameters a fit under `variant` estimates: LAD-type criteria recover the
/// true ones scaled by `median(e^2)`.
fn arch_target(c0: f64, coef: &[f64], variant: ArchVariant, error: ErrorDist) -> Vec<f64> {
    let k = if variant.targets_median_scale() {
        error.median_of_square()
    } else {
        1.0
    };
    std::iter::once(c0).chain(coef.iter().copied()).map(|v| v * k).collect()
}

fn arch_param_names(p: usize) -> Vec<String> {
    crate::bootstrap::arch_param_names(p)
}

fn arch_estimator_comparison(config: &ExperimentConfig, root: &RngStream, b: &mut Builder<'_>) -> Result<()> {
    let (c0, coef) = config.arch_params()?;
    let p = coef.len();
    let variants = config.arch_variants()?;
    let n = config.n;
    let root_n = (n as f64).sqrt();
    let mut table = Table::new(
        "average_error",
        &["distribution", "estimator", "average_error", "included", "excluded_small_b1", "failed_fits"],
    );
    for (d, error) in config.error_dists().into_iter().enumerate() {
        let spec = ArchSpec {
            c0,
            b: coef.clone(),
            error,
        };
        // Every replicate series is fitted by all variants.
        let fits: Vec<Result<Vec<Option<Vec<f64>>>>> =
            monte_carlo(config.mc_replicates, &root.child(MC_STREAM).child(d as u64), |s| {
                let series = simulate_arch(&spec, n, DEFAULT_ARCH_BURN_IN, s)?;
                Ok(variants
                    .iter()
                    .map(|v| arch_fit(series.values(), p, *v).ok().map(|f| f.estimate))
                    .collect())
            });
        let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, variant) in variants.iter().enumerate() {
            let estimates: Vec<Vec<f64>> = fits.iter().filter_map(|f| f[k].clone()).collect();
            let failed = fits.len() - estimates.len();
            let summary = average_absolute_error(&estimates, (c0, coef[0]));
            let (value, included, excluded) = match &summary {
                Ok(s) => (Cell::Num(s.value), s.included, s.excluded),
                Err(_) => (Cell::Missing, 0, estimates.len()),
            };
            table.push(vec![
                error.to_string().into(),
                variant.name().into(),
                value,
                included.into(),
                excluded.into(),
                failed.into(),
            ]);
            let context = format!("{error}/{variant}");
            b.exclusions.push(Exclusion {
                context: context.clone(),
                count: excluded,
                reason: format!("b1 estimate below {}", super::MIN_B1),
            });
            if let Err(e) = summary {
                b.warnings.push(format!("{context}: {e}"));
            }
            if estimates.is_empty() {
                b.exclusions.push(Exclusion {
                    context,
                    count: failed,
                    reason: "failed fits".into(),
                });
                continue;
            }
            let target = arch_target(c0, &coef, *variant, error);
            let draws = estimates
                .iter()
                .map(|e| e.iter().zip(&target).map(|(h, t)| root_n * (h - t)).collect())
                .collect();
            let mut meta = PivotMeta::new(n, config.mc_replicates);
            meta.dropped = failed;
            let sample = PivotSample::new(
                PivotKind::MonteCarlo,
                arch_param_names(p),
                "sqrt(n)(theta_hat - theta_target)",
                draws,
                meta,
            )?;
            b.add_sample(&format!("mc_{error}_{variant}"), sample)?;
        }
    }
    b.extra.push(table);
    Ok(())
}

fn arch_bootstrap_consistency(config: &ExperimentConfig, root: &RngStream, b: &mut Builder<'_>) -> Result<()> {
    let (c0, coef) = config.arch_params()?;
    let p = coef.len();
    let error = config.error();
    let spec = ArchSpec {
        c0,
        b: coef.clone(),
        error,
    };
    let variants = config.arch_variants()?;
    let n = config.n;
    let root_n = (n as f64).sqrt();
    let truth: Vec<f64> = std::iter::once(c0).chain(coef.iter().copied()).collect();
    let simulate = |s: &RngStream| simulate_arch(&spec, n, DEFAULT_ARCH_BURN_IN, s);

    // Monte-Carlo: plain pivots per variant, plus the studentized
    // quasi-likelihood pivot matching the residual bootstrap.
    let mc: Vec<Result<(Vec<Option<Vec<f64>>>, Option<Vec<f64>>)>> =
        monte_carlo(config.mc_replicates, &root.child(MC_STREAM), |s| {
            let series = simulate(s)?;
            let x = series.values();
            let plain = variants
                .iter()
                .map(|v| {
                    let fit = arch_fit(x, p, *v).ok()?;
                    let target = arch_target(c0, &coef, *v, error);
                    Some(fit.estimate.iter().zip(&target).map(|(h, t)| root_n * (h - t)).collect())
                })
                .collect();
            let studentized = arch_fit(x, p, ArchVariant::GaussianNll)
                .ok()
                .and_then(|f| studentized_fit_error(x, &f.estimate, &truth).ok());
            Ok((plain, studentized))
        });
    let mc = mc.into_iter().collect::<Result<Vec<_>>>()?;
    let names = arch_param_names(p);
    let mc_sample = |draws: Vec<Vec<f64>>, def: &str| -> Result<PivotSample> {
        let mut meta = PivotMeta::new(n, config.mc_replicates);
        meta.dropped = config.mc_replicates - draws.len();
        if draws.is_empty() {
            return Err(Error::Solver("every Monte-Carlo fit failed".into()));
        }
        PivotSample::new(PivotKind::MonteCarlo, names.clone(), def, draws, meta)
    };
    for (k, v) in variants.iter().enumerate() {
        let draws = mc.iter().filter_map(|(plain, _)| plain[k].clone()).collect();
        b.add_sample(&format!("mc_{v}"), mc_sample(draws, "sqrt(n)(theta_hat - theta_target)")?)?;
    }
    let studentized = mc.iter().filter_map(|(_, s)| s.clone()).collect();
    b.add_sample(
        "mc_gaussian_nll_studentized",
        mc_sample(studentized, "sqrt(n)(theta_hat - theta)/tau_hat")?,
    )?;

    let scheme = config.weight_scheme(n - p)?;
    for (k, v) in variants.iter().enumerate() {
        let v = *v;
        let wb = bootstrap_sample(config, root, k as u64, &simulate, &|x, reps, s| {
            arch_weighted_bootstrap(x, p, v, &scheme, reps, s)
        })?;
        let stem = format!("wb_{v}");
        b.add_sample(&stem, wb)?;
        b.compare(v.name(), "wb", &stem, &format!("mc_{v}"))?;
    }
    let m = config.m_or_default(p);
    let mut sizes = vec![(n, "rb_n_out_of_n")];
    if m < n {
        sizes.push((m, "rb_m_out_of_n"));
    }
    for (i, (size, stem)) in sizes.into_iter().enumerate() {
        let rb = bootstrap_sample(config, root, 100 + i as u64, &simulate, &|x, reps, s| {
            arch_mn_residual_bootstrap(x, p, size, reps, s)
        })?;
        b.add_sample(stem, rb)?;
        b.compare("gaussian_nll", stem, stem, "mc_gaussian_nll_studentized")?;
    }
    Ok(())
}

fn limit_law_check(config: &ExperimentConfig, root: &RngStream, b: &mut Builder<'_>) -> Result<()> {
    let theta = config.theta()?;
    let n = config.n;
    let mut table = Table::new(
        "limit_law",
        &["estimator", "n", "replicates", "empirical_var", "limit_var", "ratio"],
    );
    let hetero = config.model.sigma1_sq.is_some();
    let (tau, error) = if hetero {
        let (sigma1_sq, sigma2_sq) = config.two_period()?;
        (
            TauSchedule::TwoPeriod {
                sigma1_sq,
                sigma2_sq,
            },
            config.error(),
        )
    } else {
        (TauSchedule::Constant(config.sigma()), config.error())
    };
    let spec = HeteroAr1Spec {
        theta,
        tau: tau.clone(),
        error,
    };
    let ar1 = Ar1Spec {
        theta,
        sigma: config.sigma(),
        error,
    };
    let simulate = |s: &RngStream| {
        if hetero {
            simulate_hetero_ar1(&spec, n, s)
        } else {
            simulate_ar1(&ar1, n, s)
        }
    };
    let taus = tau.taus(n)?[1..].to_vec();
    for est in config.ar1_estimators()? {
        let sample = ar1_mc_pivots(config, root, est, theta, &taus, &simulate)?;
        let model = match (hetero, est) {
            (false, Ar1Estimator::Lad) => LimitModel::Lad {
                theta,
                sigma: ar1.sigma,
                error,
            },
            (false, _) => LimitModel::Lse { theta },
            (true, Ar1Estimator::Wlse) => LimitModel::HeteroWlse {
                theta,
                tau: tau.clone(),
            },
            (true, _) => LimitModel::HeteroLse {
                theta,
                tau: tau.clone(),
            },
        };
        let limit = asymptotic_variance(&model)?.variance;
        let col = sample.column(0);
        let empirical = if col.len() >= 2 {
            Some(moment_summary(&col)?.var)
        } else {
            None
        };
        table.push(vec![
            est.name().into(),
            n.into(),
            config.mc_replicates.into(),
            empirical.into(),
            limit.into(),
            empirical.map(|e| e / limit).into(),
        ]);
        b.add_sample(&format!("mc_{}", est.name()), sample)?;
    }
    b.extra.push(table);
    Ok(())
}
