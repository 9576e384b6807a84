//! Data-generating processes: homoscedastic AR(1), AR(1) with a deterministic
//! innovation-scale schedule, and ARCH(p).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rand_weights::{ErrorDist, RngStream};

/// Burn-in used when simulating ARCH paths from a zero presample.
pub const DEFAULT_ARCH_BURN_IN: usize = 500;

/// An observed or simulated path `X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
    spec_tag: String,
}

impl Series {
    pub fn new(values: Vec<f64>, spec_tag: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite observation at t = {}",
                i + 1
            )));
        }
        Ok(Self {
            values,
            spec_tag: spec_tag.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec_tag(&self) -> &str {
        &self.spec_tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Series::new(
            self.values.iter().map(|v| v * c).collect(),
            format!("{}*{c}", self.spec_tag),
        )
    }

    /// Writes the series as CSV with header `t,x`; `t` runs from 1 and
    /// values carry 17 significant digits so a read-back is exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            writeln!(w, "t,x")?;
            for (i, v) in self.values.iter().enumerate() {
                writeln!(w, "{},{v:.16e}", i + 1)?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |message: String| Error::Csv {
            path: path.to_path_buf(),
            message,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| csv_err(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x"] {
            return Err(csv_err(format!("expected header `t,x`, found `{}`", headers.as_slice())));
        }
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let x: f64 = rec
                .get(1)
                .ok_or_else(|| csv_err(format!("row {} has no x column", i + 1)))?
                .trim()
                .parse()
                .map_err(|e| csv_err(format!("row {}: {e}", i + 1)))?;
            values.push(x);
        }
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Series::new(values, format!("csv:{tag}"))
    }
}

/// `X_t = theta X_{t-1} + sigma e_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec {
    pub theta: f64,
    /// Innovation scale. Zero is admitted for noise-free fixtures.
    pub sigma: f64,
    pub error: ErrorDist,
}

impl Ar1Spec {
    fn validate(&self) -> Result<()> {
        if !(self.theta.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR(1) requires |theta| < 1, got {}",
                self.theta
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        format!("ar1(theta={},sigma={},error={})", self.theta, self.sigma, self.error)
    }
}

/// Deterministic innovation scales `tau_t`, `t = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSchedule {
    Constant(f64),
    /// `tau_t^2 = sigma1_sq` for odd `t`, `sigma2_sq` for even `t`.
    TwoPeriod { sigma1_sq: f64, sigma2_sq: f64 },
    /// `tau_1, tau_2, ...` given explicitly.
    Explicit(Vec<f64>),
    /// `tau_t^2 = c t^alpha`.
    Power { c: f64, alpha: f64 },
}

impl TauSchedule {
    /// `tau_t` for `t >= 1`.
    pub fn tau(&self, t: usize) -> Result<f64> {
        let tau = match self {
            TauSchedule::Constant(s) => *s,
            TauSchedule::TwoPeriod { sigma1_sq, sigma2_sq } => {
                if t % 2 == 1 {
                    sigma1_sq.sqrt()
                } else {
                    sigma2_sq.sqrt()
                }
            }
            TauSchedule::Explicit(v) => *v.get(t - 1).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "explicit schedule has {} entries, t = {t} requested",
                    v.len()
                ))
            })?,
            TauSchedule::Power { c, alpha } => (c * (t as f64).powf(*alpha)).sqrt(),
        };
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau_{t} must be positive, got {tau}"
            )));
        }
        Ok(tau)
    }

    /// `tau_1, ..., tau_n`.
    pub fn taus(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|t| self.tau(t)).collect()
    }
}

/// `X_t = theta X_{t-1} + tau_t e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroAr1Spec {
    pub theta: f64,
    pub tau: TauSchedule,
    pub error: ErrorDist,
}

impl HeteroAr1Spec {
    pub fn tag(&self) -> String {
        format!("hetero_ar1(theta={},tau={:?},error={})", self.theta, self.tau, self.error)
    }
}

/// `X_t = sigma_t e_t`, `sigma_t^2 = c0 + sum_i b_i X_{t-i}^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub c0: f64,
    pub b: Vec<f64>,
    pub error: ErrorDist,
}

impl ArchSpec {
    pub fn params(&self) -> ArchParams {
        ArchParams {
            c0: self.c0,
            b: self.b.clone(),
        }
    }

    pub fn tag(&self) -> String {
        format!("arch(c0={},b={:?},error={})", self.c0, self.b, self.error)
    }
}

/// ARCH parameter vector `(c0, b_1, ..., b_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchParams {
    pub c0: f64,
    pub b: Vec<f64>,
}

impl ArchParams {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Flattens to `[c0, b_1, ..., b_p]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.b.len());
        v.push(self.c0);
        v.extend_from_slice(&self.b);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let (&c0, b) = v
            .split_first()
            .ok_or(Error::EmptyInput("ARCH parameter vector"))?;
        Ok(Self { c0, b: b.to_vec() })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ARCH intercept must be positive, got {}",
                self.c0
            )));
        }
        if let Some(b) = self.b.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "ARCH coefficients must be non-negative, got {b}"
            )));
        }
        Ok(())
    }

    /// Multiplies every component by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            c0: self.c0 * k,
            b: self.b.iter().map(|b| b * k).collect(),
        }
    }
}

/// Shared AR recursion. `X_0` is drawn first as `x0_sd * N(0,1)` (or taken
/// from `x0`), then `X_t = theta X_{t-1} + tau_t e_t` for `t = 1..=n`.
fn ar_recursion<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    start: Start,
    taus: impl Fn(usize) -> f64,
    error: ErrorDist,
    n: usize,
) -> Vec<f64> {
    let sampler = error.sampler();
    let mut prev = match start {
        Start::Stationary(sd) => {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        }
        Start::Fixed(x0) => x0,
    };
    let mut out = Vec::with_capacity(n);
    for t in 1..=n {
        let x = theta * prev + taus(t) * sampler.sample(rng);
        out.push(x);
        prev = x;
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Start {
    Stationary(f64),
    Fixed(f64),
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "series length must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Simulates `X_1..X_n` of a stationary AR(1). `X_0 ~ N(0, sigma^2/(1-theta^2))`
/// whatever the innovation law.
pub fn simulate_ar1(spec: &Ar1Spec, n: usize, stream: &RngStream) -> Result<Series> {
    spec.validate()?;
    check_len(n)?;
    let sd = spec.sigma / (1.0 - spec.theta * spec.theta).sqrt();
    let values = ar_recursion(
        &mut stream.rng(),
        spec.theta,
        Start::Stationary(sd),
        |_| spec.sigma,
        spec.error,
        n,
    );
    Series::new(values, spec.tag())
}

/// Like [`simulate_ar1`] but started from a fixed `X_0`.
pub fn simulate_ar1_from(spec: &Ar1Spec, x0: f64, n: usize, stream: &RngStream) -> Result<Series> {
    spec.validate()?;
    check_len(n)?;
    let values = ar_recursion(
        &mut stream.rng(),
        spec.theta,
        Start::Fixed(x0),
        |_| spec.sigma,
        spec.error,
        n,
    );
    Series::new(values, format!("{}|x0={x0}", spec.tag()))
}

/// Simulates the heteroscedastic AR(1) with `X_0 ~ N(0, tau_1^2/(1-theta^2))`.
pub fn simulate_hetero_ar1(spec: &HeteroAr1Spec, n: usize, stream: &RngStream) -> Result<Series> {
    if !(spec.theta.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "AR(1) requires |theta| < 1, got {}",
            spec.theta
        )));
    }
    check_len(n)?;
    let taus = spec.tau.taus(n)?;
    let sd = taus[0] / (1.0 - spec.theta * spec.theta).sqrt();
    let values = ar_recursion(
        &mut stream.rng(),
        spec.theta,
        Start::Stationary(sd),
        |t| taus[t - 1],
        spec.error,
        n,
    );
    Series::new(values, spec.tag())
}

fn validate_arch(c0: f64, b: &[f64]) -> Result<()> {
    ArchParams { c0, b: b.to_vec() }.validate()
}

/// Runs the ARCH recursion from a zero presample and returns the last `n`
/// of `burn_in + n` generated values.
pub fn simulate_arch(spec: &ArchSpec, n: usize, burn_in: usize, stream: &RngStream) -> Result<Series> {
    validate_arch(spec.c0, &spec.b)?;
    check_len(n)?;
    let total: f64 = spec.b.iter().sum();
    if total >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "ARCH coefficients sum to {total}; stationary simulation needs a sum below 1"
        )));
    }
    let sampler = spec.error.sampler();
    let mut rng = stream.rng();
    let values = arch_recursion(spec.c0, &spec.b, burn_in, n, || sampler.sample(&mut rng));
    Series::new(values, format!("{}|burn_in={burn_in}", spec.tag()))
}

/// ARCH recursion driven by an arbitrary innovation source; used both for
/// simulation and for residual-bootstrap regeneration.
pub(crate) fn arch_recursion(
    c0: f64,
    b: &[f64],
    burn_in: usize,
    n: usize,
    mut innovation: impl FnMut() -> f64,
) -> Vec<f64> {
    let p = b.len();
    // Presample X_{1-p}..X_0 = 0.
    let mut path = vec![0.0; p];
    path.reserve(burn_in + n);
    for _ in 0..burn_in + n {
        let t = path.len();
        let s2 = c0 + (1..=p).map(|i| b[i - 1] * path[t - i] * path[t - i]).sum::<f64>();
        path.push(s2.sqrt() * innovation());
    }
    path.split_off(p + burn_in)
}

/// `sigma_t^2(theta)` for `t = p+1..n` given observations `x`.
pub fn arch_sigma2_path(params: &ArchParams, x: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    let p = params.order();
    if x.len() <= p {
        return Err(Error::InvalidParameter(format!(
            "ARCH({p}) needs more than {p} observations, got {}",
            x.len()
        )));
    }
    Ok(sigma2_unchecked(params.c0, &params.b, x))
}

pub(crate) fn sigma2_unchecked(c0: f64, b: &[f64], x: &[f64]) -> Vec<f64> {
    let p = b.len();
    (p..x.len())
        .map(|t| {
            let mut s = c0;
            for (i, bi) in b.iter().enumerate() {
                let lag = x[t - 1 - i];
                s += bi * lag * lag;
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    fn normal_ar1(theta: f64, sigma: f64) -> Ar1Spec {
        Ar1Spec {
            theta,
            sigma,
            error: ErrorDist::StandardNormal,
        }
    }

    #[test]
    fn noise_free_recursion_is_geometric() {
        let s = simulate_ar1_from(&normal_ar1(0.5, 0.0), 1.0, 6, &RngStream::new(0)).unwrap();
        for (t, x) in s.values().iter().enumerate() {
            assert_eq!(*x, 0.5f64.powi(t as i32 + 1));
        }
    }

    #[test]
    fn ar1_stationary_variance_and_autocorrelation() {
        let s = simulate_ar1(&normal_ar1(0.5, 1.0), 100_000, &RngStream::new(21)).unwrap();
        let v = var(s.values());
        assert!((v - 4.0 / 3.0).abs() < 0.05, "var {v}");
        let x = s.values();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        assert!((num / den - 0.5).abs() < 0.02);
    }

    #[test]
    fn ar1_rejects_unit_root() {
        assert!(simulate_ar1(&normal_ar1(1.0, 1.0), 10, &RngStream::new(0)).is_err());
        assert!(simulate_ar1(&normal_ar1(-1.2, 1.0), 10, &RngStream::new(0)).is_err());
        assert!(simulate_ar1(&normal_ar1(0.2, 1.0), 1, &RngStream::new(0)).is_err());
    }

    #[test]
    fn constant_and_unit_two_period_schedules_match_ar1() {
        let stream = RngStream::new(4).child(2);
        let ar = simulate_ar1(&normal_ar1(0.5, 1.0), 200, &stream).unwrap();
        for tau in [
            TauSchedule::Constant(1.0),
            TauSchedule::TwoPeriod {
                sigma1_sq: 1.0,
                sigma2_sq: 1.0,
            },
        ] {
            let spec = HeteroAr1Spec {
                theta: 0.5,
                tau,
                error: ErrorDist::StandardNormal,
            };
            let h = simulate_hetero_ar1(&spec, 200, &stream).unwrap();
            assert_eq!(h.values(), ar.values());
        }
    }

    #[test]
    fn two_period_innovation_variance_at_odd_t() {
        let spec = HeteroAr1Spec {
            theta: 0.5,
            tau: TauSchedule::TwoPeriod {
                sigma1_sq: 1.0,
                sigma2_sq: 2.0,
            },
            error: ErrorDist::StandardNormal,
        };
        let root = RngStream::new(7);
        // Z_3 = X_3 - theta X_2 and Z_4 over 10^5 replicates.
        let (mut z3, mut z4) = (Vec::new(), Vec::new());
        for r in 0..100_000 {
            let s = simulate_hetero_ar1(&spec, 4, &root.child(r)).unwrap();
            let x = s.values();
            z3.push(x[2] - 0.5 * x[1]);
            z4.push(x[3] - 0.5 * x[2]);
        }
        let se = (2.0f64 / 100_000.0).sqrt();
        assert!((var(&z3) - 1.0).abs() < 3.0 * se);
        assert!((var(&z4) - 2.0).abs() < 3.0 * 2.0 * se);
    }

    #[test]
    fn schedules_reject_non_positive_tau() {
        assert!(TauSchedule::Constant(0.0).tau(1).is_err());
        assert!(TauSchedule::Explicit(vec![1.0, -1.0]).taus(2).is_err());
        assert!(TauSchedule::Explicit(vec![1.0]).taus(2).is_err());
        let p = TauSchedule::Power { c: 2.0, alpha: 1.0 };
        assert!((p.tau(3).unwrap() - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn arch_with_zero_coefficients_is_white_noise() {
        let spec = ArchSpec {
            c0: 1.0,
            b: vec![0.0],
            error: ErrorDist::StandardNormal,
        };
        let s = simulate_arch(&spec, 50_000, 10, &RngStream::new(1)).unwrap();
        assert!((var(s.values()) - 1.0).abs() < 0.03);
        let path = arch_sigma2_path(&spec.params(), s.values()).unwrap();
        assert!(path.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn arch1_stationary_variance() {
        let spec = ArchSpec {
            c0: 1.0,
            b: vec![0.5],
            error: ErrorDist::StandardNormal,
        };
        let s = simulate_arch(&spec, 100_000, DEFAULT_ARCH_BURN_IN, &RngStream::new(2)).unwrap();
        assert_eq!(s.len(), 100_000);
        assert!((var(s.values()) - 2.0).abs() < 0.1);
    }

    #[test]
    fn arch_rejects_non_stationary_or_invalid() {
        let mk = |c0, b: Vec<f64>| ArchSpec {
            c0,
            b,
            error: ErrorDist::StandardNormal,
        };
        assert!(simulate_arch(&mk(1.0, vec![0.6, 0.4]), 10, 0, &RngStream::new(0)).is_err());
        assert!(simulate_arch(&mk(0.0, vec![0.1]), 10, 0, &RngStream::new(0)).is_err());
        assert!(simulate_arch(&mk(1.0, vec![-0.1]), 10, 0, &RngStream::new(0)).is_err());
    }

    #[test]
    fn sigma2_path_by_hand() {
        let p = ArchParams { c0: 1.0, b: vec![0.5] };
        assert_eq!(arch_sigma2_path(&p, &[1.0, 2.0]).unwrap(), vec![1.5]);
        assert!(arch_sigma2_path(&p, &[1.0]).is_err());
        let p2 = ArchParams {
            c0: 0.5,
            b: vec![0.25, 0.5],
        };
        // t=3: 0.5 + 0.25*4 + 0.5*1 ; t=4: 0.5 + 0.25*9 + 0.5*4
        assert_eq!(arch_sigma2_path(&p2, &[1.0, 2.0, 3.0, 0.0]).unwrap(), vec![2.0, 4.75]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = simulate_ar1(&normal_ar1(0.3, 1.7), 500, &RngStream::new(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let back = Series::read_csv(&path).unwrap();
        assert_eq!(back.values(), s.values());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x\n1,"));
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n2,3\n").unwrap();
        assert!(matches!(Series::read_csv(&path), Err(Error::Csv { .. })));
    }

    #[test]
    fn series_invariants() {
        assert!(Series::new(vec![1.0], "x").is_err());
        assert!(Series::new(vec![1.0, f64::NAN], "x").is_err());
    }
}
