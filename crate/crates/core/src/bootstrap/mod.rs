//! Resampling engines producing studentized pivot samples.

mod ar1;
mod arch;

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use ar1::{
    ar1_residual_bootstrap, ar1_weighted_bootstrap, ar1_weighted_lad_bootstrap,
    standardized_residuals, weighted_lad_estimate, weighted_lse_estimate,
};
pub(crate) use arch::{arch_param_names, studentized_fit_error};
pub use arch::{
    arch_mn_residual_bootstrap, arch_weighted_bootstrap, arch_weighted_fit, kurtosis_scale,
    ARCH_BOOTSTRAP_RESTARTS, MN_BURN_IN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotKind {
    MonteCarlo,
    ResidualBs,
    WeightedBs,
    MnResidualBs,
}

impl fmt::Display for PivotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PivotKind::MonteCarlo => "monte_carlo",
            PivotKind::ResidualBs => "residual_bs",
            PivotKind::WeightedBs => "weighted_bs",
            PivotKind::MnResidualBs => "mn_residual_bs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotMeta {
    /// Length of the series the pivots describe.
    pub n: usize,
    /// Bootstrap subsample length, for m-out-of-n schemes.
    pub m: Option<usize>,
    /// Replicates requested.
    pub replicates: usize,
    pub scheme: Option<String>,
    /// Weight rows redrawn because the replicate was undefined.
    pub rejected: usize,
    /// Replicates discarded after a failed refit.
    pub dropped: usize,
}

impl PivotMeta {
    pub fn new(n: usize, replicates: usize) -> Self {
        Self {
            n,
            m: None,
            replicates,
            scheme: None,
            rejected: 0,
            dropped: 0,
        }
    }
}

/// Draws of a (possibly vector-valued) pivot, one row per replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotSample {
    pub kind: PivotKind,
    pub param_names: Vec<String>,
    /// Human-readable definition, e.g. `sqrt(n)(theta* - theta_hat)/sigma_n`.
    pub pivot_def: String,
    draws: Vec<Vec<f64>>,
    pub meta: PivotMeta,
}

impl PivotSample {
    pub fn new(
        kind: PivotKind,
        param_names: Vec<String>,
        pivot_def: impl Into<String>,
        draws: Vec<Vec<f64>>,
        meta: PivotMeta,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::EmptyInput("pivot sample has no draws"));
        }
        if let Some(bad) = draws.iter().position(|d| d.len() != param_names.len()) {
            return Err(Error::InvalidParameter(format!(
                "draw {bad} has {} components, expected {}",
                draws[bad].len(),
                param_names.len()
            )));
        }
        if draws.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("pivot sample contains non-finite draws".into()));
        }
        Ok(Self {
            kind,
            param_names,
            pivot_def: pivot_def.into(),
            draws,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    /// All draws of parameter `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }

    /// All draws of the parameter called `name`.
    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.param_names.iter().position(|p| p == name)?;
        Some(self.column(j))
    }

    /// Writes `replicate,param,pivot` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["replicate", "param", "pivot"])
            .map_err(|e| csv_error(path, e))?;
        for (r, draw) in self.draws.iter().enumerate() {
            for (name, v) in self.param_names.iter().zip(draw) {
                w.write_record([r.to_string(), name.clone(), format!("{v:.16e}")])
                    .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Reads a `replicate,param,pivot` file into per-parameter columns, in order
/// of first appearance.
pub fn read_pivot_csv(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["replicate", "param", "pivot"] {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "expected header `replicate,param,pivot`".into(),
        });
    }
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::Csv {
            path: path.to_path_buf(),
            message: format!("row {}: {what}", line + 2),
        };
        let name = rec.get(1).ok_or_else(|| bad("missing param"))?;
        let value: f64 = rec
            .get(2)
            .ok_or_else(|| bad("missing pivot"))?
            .trim()
            .parse()
            .map_err(|_| bad("pivot is not a number"))?;
        match columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, col)) => col.push(value),
            None => columns.push((name.to_string(), vec![value])),
        }
    }
    if columns.is_empty() {
        return Err(Error::EmptyInput("pivot CSV has no rows"));
    }
    Ok(columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let draws = vec![vec![0.1, -1.0 / 3.0], vec![1e-300, 12345.678901234567]];
        let s = PivotSample::new(
            PivotKind::WeightedBs,
            vec!["c0".into(), "b1".into()],
            "test",
            draws.clone(),
            PivotMeta::new(10, 2),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        s.write_csv(&path).unwrap();
        let cols = read_pivot_csv(&path).unwrap();
        assert_eq!(cols[0].0, "c0");
        assert_eq!(cols[0].1, vec![0.1, 1e-300]);
        assert_eq!(cols[1].1, vec![-1.0 / 3.0, 12345.678901234567]);
    }

    #[test]
    fn rejects_ragged_or_non_finite_draws() {
        let names = vec!["theta".to_string()];
        let meta = PivotMeta::new(5, 1);
        assert!(PivotSample::new(PivotKind::MonteCarlo, names.clone(), "", vec![], meta.clone()).is_err());
        assert!(PivotSample::new(PivotKind::MonteCarlo, names.clone(), "", vec![vec![1.0, 2.0]], meta.clone()).is_err());
        assert!(PivotSample::new(PivotKind::MonteCarlo, names, "", vec![vec![f64::NAN]], meta).is_err());
    }

    #[test]
    fn bad_header_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "a,b,c\n0,theta,1\n").unwrap();
        assert!(matches!(read_pivot_csv(&path), Err(Error::Csv { .. })));
    }
}
