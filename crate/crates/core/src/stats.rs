//! Two-sample Kolmogorov-Smirnov tests, kernel density curves and moment
//! summaries for pivot samples.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    /// `sup |F_a - F_b|` over the empirical CDFs.
    pub d_stat: f64,
    /// Asymptotic p-value `Q(D sqrt(n1 n2 / (n1 + n2)))`.
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn sorted_finite(sample: &[f64], what: &'static str) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(format!("{what} contains NaN")));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Exact two-sample KS distance. All copies of a tied value are consumed
/// from both samples before the gap is measured.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a, "first KS sample")?;
    let b = sorted_finite(b, "second KS sample")?;
    Ok(ks_sorted(&a, &b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // Past the end of one sample the remaining gap only shrinks.
    d
}

/// Kolmogorov tail `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
///
/// For `lambda < 0.3` the alternating series needs very many terms, and the
/// equivalent theta-function form
/// `1 - sqrt(2 pi)/lambda * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lambda^2))`
/// is summed instead. Both are truncated once a term drops below `1e-12`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda.is_nan() {
        return f64::NAN;
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 0.3 {
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * PI * PI / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < 1e-12 {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-12 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic Kolmogorov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    let d = ks_statistic(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let lambda = d * ((n1 * n2) as f64 / (n1 + n2) as f64).sqrt();
    Ok(KsReport {
        d_stat: d,
        p_value: kolmogorov_q(lambda),
        n1,
        n2,
    })
}

/// A density estimate tabulated on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Writes `x,density` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::fmt::Write as _;
        let path = path.as_ref();
        let mut out = String::from("x,density\n");
        for (x, d) in self.grid.iter().zip(&self.density) {
            let _ = writeln!(out, "{x:.16e},{d:.16e}");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn mean_and_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Gaussian kernel density estimate with Silverman's bandwidth
/// `1.06 s n^{-1/5}` on `grid_size` equispaced points covering the sample
/// range widened by four bandwidths on each side.
pub fn kde_gaussian(sample: &[f64], grid_size: usize) -> Result<DensityCurve> {
    if sample.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "density estimation needs at least 2 points, got {}",
            sample.len()
        )));
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("density grid needs at least 2 points".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("density sample contains non-finite values".into()));
    }
    let (_, var) = mean_and_var(sample);
    if !(var > 0.0) {
        return Err(Error::Degenerate("density sample has zero variance".into()));
    }
    let n = sample.len() as f64;
    let h = 1.06 * var.sqrt() * n.powf(-0.2);
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|g| {
            norm * sample
                .iter()
                .map(|x| {
                    let u = (g - x) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Quantile of a sorted sample by linear interpolation between order
/// statistics at position `(n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside [0, 1]")));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased (divisor `n - 1`).
    pub var: f64,
    /// `m3 / m2^{3/2}` from central sample moments; absent for a constant sample.
    pub skew: Option<f64>,
    /// `m4 / m2^2` (3 for a normal law); absent for a constant sample.
    pub kurt: Option<f64>,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

pub fn moment_summary(sample: &[f64]) -> Result<MomentSummary> {
    if sample.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "moment summary needs at least 2 values, got {}",
            sample.len()
        )));
    }
    let sorted = sorted_finite(sample, "moment sample")?;
    let (mean, var) = mean_and_var(sample);
    let n = sample.len() as f64;
    let central = |k: i32| sample.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let m2 = central(2);
    let (skew, kurt) = if m2 > 0.0 {
        (Some(central(3) / m2.powf(1.5)), Some(central(4) / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(MomentSummary {
        n: sample.len(),
        mean,
        var,
        skew,
        kurt,
        q025: quantile(&sorted, 0.025)?,
        q500: quantile(&sorted, 0.5)?,
        q975: quantile(&sorted, 0.975)?,
    })
}
