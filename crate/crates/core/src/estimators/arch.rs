use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::simplex::{minimize_box_positive, SimplexOptions};
use super::EstimatorResult;
use crate::error::{Error, Result};
use crate::processes::ArchParams;

/// ARCH fitting criteria. All sums run over `t = p+1..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchVariant {
    /// `sum (log sigma_t^2 + X_t^2 / sigma_t^2)`.
    GaussianNll,
    /// `sum |X_t^2 / sigma_t^2 - 1|`.
    Lade1,
    /// `sum |log X_t^2 - log sigma_t^2|`.
    Lade2,
    /// `sum |X_t^2 - sigma_t^2|`.
    Lade3,
}

impl ArchVariant {
    pub const ALL: [ArchVariant; 4] = [
        ArchVariant::GaussianNll,
        ArchVariant::Lade1,
        ArchVariant::Lade2,
        ArchVariant::Lade3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ArchVariant::GaussianNll => "gaussian_nll",
            ArchVariant::Lade1 => "lade1",
            ArchVariant::Lade2 => "lade2",
            ArchVariant::Lade3 => "lade3",
        }
    }

    /// Whether the criterion estimates the parameters rescaled so that
    /// `median(e_t^2) = 1` rather than `Var(e_t) = 1`.
    pub fn targets_median_scale(&self) -> bool {
        !matches!(self, ArchVariant::GaussianNll)
    }

    #[inline]
    fn term(&self, x2: f64, s2: f64, log_x2: f64) -> f64 {
        match self {
            ArchVariant::GaussianNll => s2.ln() + x2 / s2,
            ArchVariant::Lade1 => (x2 / s2 - 1.0).abs(),
            ArchVariant::Lade2 => (log_x2 - s2.ln()).abs(),
            ArchVariant::Lade3 => (x2 - s2).abs(),
        }
    }
}

impl fmt::Display for ArchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ArchVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ARCH criterion `{s}`")))
    }
}

fn check_inputs(params: &ArchParams, x: &[f64], variant: ArchVariant) -> Result<()> {
    params.validate()?;
    let p = params.order();
    if x.len() <= p {
        return Err(Error::InvalidParameter(format!(
            "ARCH({p}) needs more than {p} observations, got {}",
            x.len()
        )));
    }
    if variant == ArchVariant::Lade2 {
        if let Some(i) = x[p..].iter().position(|v| *v == 0.0) {
            return Err(Error::Degenerate(format!(
                "observation X_{} is exactly zero; log X^2 is undefined under lade2",
                p + i + 1
            )));
        }
    }
    Ok(())
}

/// Per-summand contributions for `t = p+1..n`.
pub fn arch_terms(params: &ArchParams, x: &[f64], variant: ArchVariant) -> Result<Vec<f64>> {
    check_inputs(params, x, variant)?;
    let p = params.order();
    let s2 = crate::processes::sigma2_unchecked(params.c0, &params.b, x);
    Ok(x[p..]
        .iter()
        .zip(s2)
        .map(|(xt, s2)| {
            let x2 = xt * xt;
            variant.term(x2, s2, x2.ln())
        })
        .collect())
}

/// The chosen criterion at `params`.
pub fn arch_objective(params: &ArchParams, x: &[f64], variant: ArchVariant) -> Result<f64> {
    Ok(arch_terms(params, x, variant)?.iter().sum())
}

/// Precomputed data for repeated objective evaluation inside the solver.
pub(crate) struct ArchData {
    x2: Vec<f64>,
    log_x2: Vec<f64>,
    variant: ArchVariant,
    p: usize,
}

impl ArchData {
    pub(crate) fn new(x: &[f64], p: usize, variant: ArchVariant) -> Result<Self> {
        let probe = ArchParams {
            c0: 1.0,
            b: vec![0.0; p],
        };
        check_inputs(&probe, x, variant)?;
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let log_x2 = if variant == ArchVariant::Lade2 {
            x2.iter().map(|v| v.ln()).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            x2,
            log_x2,
            variant,
            p,
        })
    }

    /// Objective at `theta = [c0, b_1..b_p]`, optionally weighting summand
    /// `t` by `w[t - p - 1]`.
    pub(crate) fn eval(&self, theta: &[f64], weights: Option<&[f64]>) -> f64 {
        let (c0, b) = (theta[0], &theta[1..]);
        let mut total = 0.0;
        for t in self.p..self.x2.len() {
            let mut s2 = c0;
            for (i, bi) in b.iter().enumerate() {
                s2 += bi * self.x2[t - 1 - i];
            }
            let lx = if self.log_x2.is_empty() {
                0.0
            } else {
                self.log_x2[t]
            };
            let term = self.variant.term(self.x2[t], s2, lx);
            total += match weights {
                Some(w) => w[t - self.p] * term,
                None => term,
            };
        }
        total
    }
}

/// Starting point `c0 = s^2 (1 - 0.1 p)`, `b_i = 0.1`, with `s^2` the sample
/// variance.
pub fn default_arch_init(x: &[f64], p: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let c0 = (var * (1.0 - 0.1 * p as f64)).max(var * 0.01).max(1e-8);
    let mut init = vec![0.1; p + 1];
    init[0] = c0;
    init
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArchFitOptions {
    pub simplex: SimplexOptions,
    /// `[c0, b_1..b_p]`; [`default_arch_init`] when absent.
    pub init: Option<Vec<f64>>,
}

/// Minimum number of observations beyond the order required by [`arch_fit`].
pub(crate) const MIN_EXCESS_OBS: usize = 20;

/// Fits ARCH(`p`) under `variant` with default solver settings.
pub fn arch_fit(x: &[f64], p: usize, variant: ArchVariant) -> Result<EstimatorResult> {
    arch_fit_with(x, p, variant, &ArchFitOptions::default())
}

/// Fits ARCH(`p`) from `opts.init`, or, without one, from both
/// [`default_arch_init`] and the best node of a coarse log grid, keeping the
/// lower objective.
pub fn arch_fit_with(
    x: &[f64],
    p: usize,
    variant: ArchVariant,
    opts: &ArchFitOptions,
) -> Result<EstimatorResult> {
    if p == 0 {
        return Err(Error::InvalidParameter("ARCH order must be at least 1".into()));
    }
    if x.len() < p + MIN_EXCESS_OBS {
        return Err(Error::InvalidParameter(format!(
            "ARCH({p}) fitting needs at least {} observations, got {}",
            p + MIN_EXCESS_OBS,
            x.len()
        )));
    }
    let data = ArchData::new(x, p, variant)?;
    let objective = |theta: &[f64]| data.eval(theta, None);
    match &opts.init {
        Some(v) if v.len() == p + 1 => minimize_box_positive(objective, v, &opts.simplex),
        Some(v) => Err(Error::InvalidParameter(format!(
            "initial point has {} components, ARCH({p}) needs {}",
            v.len(),
            p + 1
        ))),
        None => {
            let init = default_arch_init(x, p);
            let local = minimize_box_positive(objective, &init, &opts.simplex)?;
            let scan = grid_start(&data, init[0] / (1.0 - 0.1 * p as f64).max(0.01), p);
            let single = SimplexOptions {
                restarts: 1,
                ..opts.simplex.clone()
            };
            let global = minimize_box_positive(objective, &scan, &single)?;
            let restarts_used = local.restarts_used + 1;
            let iterations = local.iterations + global.iterations;
            let mut best = if global.objective < local.objective {
                global
            } else {
                local
            };
            best.restarts_used = restarts_used;
            best.iterations = iterations;
            Ok(best)
        }
    }
}

/// Best node of a log-spaced grid: `c0` from `0.01 s2` to `10 s2`, all
/// `b_i` equal and from `1e-4 / p` to `100 / p`.
fn grid_start(data: &ArchData, s2: f64, p: usize) -> Vec<f64> {
    let mut best = (f64::INFINITY, vec![s2; p + 1]);
    let mut theta = vec![0.0; p + 1];
    for i in 0..=12 {
        theta[0] = s2 * 10f64.powf(-2.0 + 0.25 * i as f64);
        for j in 0..=15 {
            let b = 10f64.powf(-4.0 + 0.4 * j as f64) / p as f64;
            theta[1..].fill(b);
            let f = data.eval(&theta, None);
            if f < best.0 {
                best = (f, theta.clone());
            }
        }
    }
    best.1
}
