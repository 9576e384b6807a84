use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ArchVariant;
use crate::rand_weights::{ErrorDist, IidWeight, WeightKind, WeightScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ar1BootstrapComparison,
    HeteroBootstrapComparison,
    ArchEstimatorComparison,
    ArchBootstrapConsistency,
    LimitLawCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Ar1BootstrapComparison => "ar1_bootstrap_comparison",
            ExperimentKind::HeteroBootstrapComparison => "hetero_bootstrap_comparison",
            ExperimentKind::ArchEstimatorComparison => "arch_estimator_comparison",
            ExperimentKind::ArchBootstrapConsistency => "arch_bootstrap_consistency",
            ExperimentKind::LimitLawCheck => "limit_law_check",
        }
    }

    /// Whether the protocol draws bootstrap replicates, so that `B` is used.
    pub fn uses_bootstrap(&self) -> bool {
        !matches!(
            self,
            ExperimentKind::ArchEstimatorComparison | ExperimentKind::LimitLawCheck
        )
    }

    /// Index of the experiment's random stream below the master seed.
    pub(crate) fn stream_index(&self) -> u64 {
        match self {
            ExperimentKind::Ar1BootstrapComparison => 1,
            ExperimentKind::HeteroBootstrapComparison => 2,
            ExperimentKind::ArchEstimatorComparison => 3,
            ExperimentKind::ArchBootstrapConsistency => 4,
            ExperimentKind::LimitLawCheck => 5,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model parameters; which fields are required depends on the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDist>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    #[default]
    Multinomial,
    /// iid `Normal(1, weight_variance)`.
    Normal,
    /// iid `Exp(1)`.
    Exponential,
}

/// AR(1) point estimators selectable in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar1Estimator {
    Lse,
    Lad,
    Wlse,
    Wlad,
}

impl Ar1Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Ar1Estimator::Lse => "lse",
            Ar1Estimator::Lad => "lad",
            Ar1Estimator::Wlse => "wlse",
            Ar1Estimator::Wlad => "wlad",
        }
    }
}

impl FromStr for Ar1Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Ar1Estimator::Lse,
            Ar1Estimator::Lad,
            Ar1Estimator::Wlse,
            Ar1Estimator::Wlad,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown AR(1) estimator `{s}`")))
    }
}

/// A single experiment definition, read from one flat JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelParams,
    /// Series length.
    pub n: usize,
    /// Bootstrap replicates.
    #[serde(rename = "B")]
    pub b: usize,
    pub mc_replicates: usize,
    /// Subsample length of the m-out-of-n bootstrap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub weight_scheme: WeightLaw,
    /// Variance of `Normal` weights (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_variance: Option<f64>,
    /// Estimator names; meaning depends on the experiment.
    #[serde(default)]
    pub estimators: Vec<String>,
    #[serde(default)]
    pub error_dists: Vec<ErrorDist>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Draw a fresh series for every bootstrap replicate instead of
    /// conditioning on one series.
    #[serde(default)]
    pub fresh_series_per_replicate: bool,
}

fn require(field: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("model.{field} is required for this experiment")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n", self.n), ("B", self.b), ("mc_replicates", self.mc_replicates)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        match self.experiment {
            ExperimentKind::Ar1BootstrapComparison | ExperimentKind::LimitLawCheck => {
                self.theta()?;
                if self.n < 3 {
                    return Err(Error::Config("n must be at least 3".into()));
                }
                self.ar1_estimators()?;
            }
            ExperimentKind::HeteroBootstrapComparison => {
                self.theta()?;
                self.two_period()?;
                if self.n < 3 {
                    return Err(Error::Config("n must be at least 3".into()));
                }
                self.ar1_estimators()?;
            }
            ExperimentKind::ArchEstimatorComparison | ExperimentKind::ArchBootstrapConsistency => {
                let (_, b) = self.arch_params()?;
                if self.n < b.len() + 20 {
                    return Err(Error::Config(format!(
                        "ARCH({}) experiments need n >= {}",
                        b.len(),
                        b.len() + 20
                    )));
                }
                self.arch_variants()?;
                if let Some(m) = self.m {
                    if m < b.len() + 20 || m > self.n {
                        return Err(Error::Config(format!(
                            "m = {m} must lie in [{}, n]",
                            b.len() + 20
                        )));
                    }
                }
            }
        }
        self.weight_scheme(self.n)?;
        Ok(())
    }

    pub(crate) fn theta(&self) -> Result<f64> {
        let theta = require("theta", self.model.theta)?;
        if !(theta.abs() < 1.0) {
            return Err(Error::Config(format!("|theta| must be below 1, got {theta}")));
        }
        Ok(theta)
    }

    pub(crate) fn sigma(&self) -> f64 {
        self.model.sigma.unwrap_or(1.0)
    }

    pub(crate) fn error(&self) -> ErrorDist {
        self.model.error.unwrap_or(ErrorDist::StandardNormal)
    }

    pub(crate) fn two_period(&self) -> Result<(f64, f64)> {
        let a = require("sigma1_sq", self.model.sigma1_sq)?;
        let b = require("sigma2_sq", self.model.sigma2_sq)?;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Config("sigma1_sq and sigma2_sq must be positive".into()));
        }
        Ok((a, b))
    }

    pub(crate) fn arch_params(&self) -> Result<(f64, Vec<f64>)> {
        let c0 = require("c0", self.model.c0)?;
        let b = self
            .model
            .b
            .clone()
            .ok_or_else(|| Error::Config("model.b is required for this experiment".into()))?;
        if b.is_empty() {
            return Err(Error::Config("model.b must hold at least one coefficient".into()));
        }
        Ok((c0, b))
    }

    /// Subsample length, defaulting to `n / 2` (at least `p + 20`).
    pub(crate) fn m_or_default(&self, p: usize) -> usize {
        self.m.unwrap_or((self.n / 2).max(p + 20).min(self.n))
    }

    pub(crate) fn ar1_estimators(&self) -> Result<Vec<Ar1Estimator>> {
        let list: Vec<Ar1Estimator> = self
            .estimators
            .iter()
            .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
        let allowed: &[Ar1Estimator] = match self.experiment {
            ExperimentKind::Ar1BootstrapComparison => &[Ar1Estimator::Lse, Ar1Estimator::Lad],
            ExperimentKind::LimitLawCheck if self.model.sigma1_sq.is_some() => {
                &[Ar1Estimator::Lse, Ar1Estimator::Wlse]
            }
            ExperimentKind::LimitLawCheck => &[Ar1Estimator::Lse, Ar1Estimator::Lad],
            _ => &[Ar1Estimator::Lse],
        };
        if let Some(bad) = list.iter().find(|e| !allowed.contains(e)) {
            return Err(Error::Config(format!(
                "estimator `{}` is not available in {}",
                bad.name(),
                self.experiment
            )));
        }
        Ok(if list.is_empty() { allowed.to_vec() } else { list })
    }

    pub(crate) fn arch_variants(&self) -> Result<Vec<ArchVariant>> {
        let list: Vec<ArchVariant> = self
            .estimators
            .iter()
            .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Ok(match self.experiment {
                ExperimentKind::ArchBootstrapConsistency => {
                    vec![ArchVariant::GaussianNll, ArchVariant::Lade2]
                }
                _ => ArchVariant::ALL.to_vec(),
            });
        }
        Ok(list)
    }

    pub(crate) fn error_dists(&self) -> Vec<ErrorDist> {
        if self.error_dists.is_empty() {
            vec![self.error()]
        } else {
            self.error_dists.clone()
        }
    }

    /// Weight scheme for rows of length `len`.
    pub fn weight_scheme(&self, len: usize) -> Result<WeightScheme> {
        let kind = match self.weight_scheme {
            WeightLaw::Multinomial => WeightKind::Multinomial,
            WeightLaw::Normal => WeightKind::Iid(IidWeight::Normal {
                variance: self.weight_variance.unwrap_or(1.0),
            }),
            WeightLaw::Exponential => WeightKind::Iid(IidWeight::Exponential),
        };
        WeightScheme::new(kind, len.max(2)).map_err(|e| Error::Config(e.to_string()))
    }
}
