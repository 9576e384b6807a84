//! Reproducible random streams, innovation laws and exchangeable bootstrap
//! weights.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`]: a
//! master seed plus a derivation path. Child streams are pure functions of
//! `(master_seed, path, index)`, so replicate `k` of any engine sees the same
//! draws no matter which worker thread evaluates it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalLaw, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Version tag of the seed-derivation mix below. Bump whenever
/// [`RngStream::seed`] changes, since it changes every simulated number.
pub const SEED_MIX_VERSION: u32 = 1;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// A deterministic, splittable source of random streams.
///
/// The derived 64-bit seed is
///
/// ```text
/// h0    = mix64(master_seed + GOLDEN)
/// h_i+1 = mix64(rotl(h_i, 23) ^ mix64(k_i * GOLDEN + 1))
/// ```
///
/// with `mix64` the SplitMix64 finalizer and `k_i` the path elements. The
/// generator is ChaCha8 keyed by four successive SplitMix64 outputs of that
/// seed, which keeps the byte stream independent of `rand_core`'s own
/// seed-expansion routine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Derives the child stream at `index`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    /// The mixed 64-bit seed of this stream.
    pub fn seed(&self) -> u64 {
        let mut h = mix64(self.master_seed.wrapping_add(GOLDEN));
        for &k in &self.path {
            h = mix64(h.rotate_left(23) ^ mix64(k.wrapping_mul(GOLDEN).wrapping_add(1)));
        }
        h
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut state = self.seed();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Degrees of freedom of a standardized Student-t law; always at least 3 so
/// that the variance exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dof(u32);

impl Dof {
    pub fn new(d: u32) -> Result<Self> {
        if d <= 2 {
            return Err(Error::InvalidParameter(format!(
                "student-t degrees of freedom must be at least 3 for unit variance, got {d}"
            )));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Dof {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        Dof::new(d)
    }
}

impl From<Dof> for u32 {
    fn from(d: Dof) -> u32 {
        d.0
    }
}

/// Innovation law with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ErrorDist {
    StandardNormal,
    /// `t(d)` scaled by `sqrt((d - 2) / d)`.
    StudentT(Dof),
    /// Laplace law with density `exp(-sqrt(2)|x|) / sqrt(2)`.
    DoubleExponential,
}

impl ErrorDist {
    pub fn student_t(d: u32) -> Result<Self> {
        Ok(ErrorDist::StudentT(Dof::new(d)?))
    }

    pub fn sampler(&self) -> ErrorSampler {
        match *self {
            ErrorDist::StandardNormal => ErrorSampler::Normal,
            ErrorDist::StudentT(d) => {
                let df = f64::from(d.get());
                ErrorSampler::StudentT {
                    law: StudentT::new(df).expect("df >= 3 is a valid student-t parameter"),
                    scale: ((df - 2.0) / df).sqrt(),
                }
            }
            ErrorDist::DoubleExponential => ErrorSampler::DoubleExponential,
        }
    }

    /// One draw; prefer [`ErrorDist::sampler`] in loops.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let s = self.sampler();
        (0..n).map(|_| s.sample(rng)).collect()
    }

    /// Density of the law at zero.
    pub fn density_at_zero(&self) -> f64 {
        match *self {
            ErrorDist::StandardNormal => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            ErrorDist::StudentT(d) => {
                let df = f64::from(d.get());
                let t0 = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
                    / (df * std::f64::consts::PI).sqrt();
                t0 / ((df - 2.0) / df).sqrt()
            }
            ErrorDist::DoubleExponential => std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    /// Median of the squared innovation. LAD-type ARCH estimators target the
    /// true parameters multiplied by this factor.
    pub fn median_of_square(&self) -> f64 {
        // Symmetric laws: median(e^2) = q(0.75)^2.
        let q = match *self {
            ErrorDist::StandardNormal => NormalLaw::new(0.0, 1.0)
                .expect("standard normal")
                .inverse_cdf(0.75),
            ErrorDist::StudentT(d) => {
                let df = f64::from(d.get());
                StudentsT::new(0.0, 1.0, df)
                    .expect("valid student-t")
                    .inverse_cdf(0.75)
                    * ((df - 2.0) / df).sqrt()
            }
            ErrorDist::DoubleExponential => std::f64::consts::LN_2 * std::f64::consts::FRAC_1_SQRT_2,
        };
        q * q
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorDist::StandardNormal => f.write_str("normal"),
            ErrorDist::StudentT(d) => write!(f, "t{}", d.get()),
            ErrorDist::DoubleExponential => f.write_str("double_exponential"),
        }
    }
}

impl FromStr for ErrorDist {
    type Err = Error;

    /// Accepts `normal`, `t<d>` (e.g. `t3`), `double_exponential` or `laplace`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "standard_normal" => Ok(ErrorDist::StandardNormal),
            "double_exponential" | "laplace" => Ok(ErrorDist::DoubleExponential),
            _ => {
                let digits = s
                    .strip_prefix("student_t")
                    .or_else(|| s.strip_prefix('t'))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown error law `{s}`")))?;
                let d: u32 = digits.trim_start_matches('_').parse().map_err(|_| {
                    Error::InvalidParameter(format!("unknown error law `{s}`"))
                })?;
                ErrorDist::student_t(d)
            }
        }
    }
}

impl TryFrom<String> for ErrorDist {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ErrorDist> for String {
    fn from(d: ErrorDist) -> String {
        d.to_string()
    }
}

/// Prepared sampler for an [`ErrorDist`].
#[derive(Debug, Clone, Copy)]
pub enum ErrorSampler {
    Normal,
    StudentT { law: StudentT<f64>, scale: f64 },
    DoubleExponential,
}

impl ErrorSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorSampler::Normal => StandardNormal.sample(rng),
            ErrorSampler::StudentT { law, scale } => law.sample(rng) * scale,
            ErrorSampler::DoubleExponential => {
                // Inverse CDF of Laplace(0, 1/sqrt(2)).
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }
}

/// Draws `m` values uniformly with replacement from `values`.
pub fn resample_with_replacement<R: Rng + ?Sized>(
    rng: &mut R,
    values: &[f64],
    m: usize,
) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("resample_with_replacement: values"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "resample size must be at least 1".into(),
        ));
    }
    let k = values.len();
    Ok((0..m).map(|_| values[rng.random_range(0..k)]).collect())
}

/// Law of the iid weights in a [`WeightKind::Iid`] scheme. All have mean 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum IidWeight {
    /// `Normal(1, variance)`; rows may contain negative entries.
    Normal { variance: f64 },
    /// `Exp(1)`: non-negative, variance 1.
    Exponential,
}

impl IidWeight {
    fn variance(&self) -> f64 {
        match *self {
            IidWeight::Normal { variance } => variance,
            IidWeight::Exponential => 1.0,
        }
    }

    fn fourth_central(&self) -> Option<f64> {
        match *self {
            IidWeight::Normal { variance } => Some(3.0 * variance * variance),
            IidWeight::Exponential => Some(9.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `Mult(n; 1/n, ..., 1/n)` counts (the paired bootstrap).
    Multinomial,
    Iid(IidWeight),
    /// Every weight is exactly 1. Only useful as a degeneracy fixture: the
    /// bootstrap estimate then equals the original one.
    Unit,
}

/// An exchangeable weight scheme for rows of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: WeightKind,
    pub n: usize,
}

/// Analytic moments of one weight row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightMoments {
    pub mean: f64,
    /// `sigma_n^2 = Var(w_1)`.
    pub var: f64,
    /// `c_1n = Cov(w_1, w_2)`.
    pub cov: f64,
    /// `E(w_1 - 1)^4`, when known.
    pub fourth_central: Option<f64>,
}

impl WeightScheme {
    pub fn new(kind: WeightKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "weight rows need n >= 2, got {n}"
            )));
        }
        if let WeightKind::Iid(IidWeight::Normal { variance }) = kind {
            if !(variance.is_finite() && variance > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "iid weight variance must be positive and finite, got {variance}"
                )));
            }
        }
        Ok(Self { kind, n })
    }

    pub fn multinomial(n: usize) -> Result<Self> {
        Self::new(WeightKind::Multinomial, n)
    }

    pub fn iid_normal(n: usize, variance: f64) -> Result<Self> {
        Self::new(WeightKind::Iid(IidWeight::Normal { variance }), n)
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(WeightKind::Unit, n)
    }

    /// Same law for a different row length.
    pub fn with_len(&self, n: usize) -> Result<Self> {
        Self::new(self.kind, n)
    }

    pub fn moments(&self) -> WeightMoments {
        weight_moments(self)
    }

    /// `sigma_n`, the studentizing scale of bootstrap pivots. The unit scheme
    /// has zero spread and is reported with scale 1 so its pivots are 0.
    pub fn sigma_n(&self) -> f64 {
        let v = self.moments().var;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    }

    /// Whether rows can contain negative entries.
    pub fn may_be_negative(&self) -> bool {
        matches!(self.kind, WeightKind::Iid(IidWeight::Normal { .. }))
    }

    pub fn label(&self) -> String {
        match self.kind {
            WeightKind::Multinomial => "multinomial".into(),
            WeightKind::Iid(IidWeight::Normal { variance }) => format!("iid_normal(1,{variance})"),
            WeightKind::Iid(IidWeight::Exponential) => "iid_exponential".into(),
            WeightKind::Unit => "unit".into(),
        }
    }
}

/// Analytic moments of a weight scheme.
///
/// The multinomial fourth central moment is `n(pq^4 + p^4 q) + 3n(n-1)p^2 q^2`
/// with `p = 1/n`. A frequently quoted simplification of it,
/// `(1 - 1/n)(4 - 9/n + 6/n^2 + 2/n^3)`, is wrong: at `n = 2` it gives 0.625
/// while direct enumeration of Binomial(2, 1/2) gives 0.5.
pub fn weight_moments(scheme: &WeightScheme) -> WeightMoments {
    match scheme.kind {
        WeightKind::Multinomial => {
            let n = scheme.n as f64;
            let p = 1.0 / n;
            let q = 1.0 - p;
            WeightMoments {
                mean: 1.0,
                var: 1.0 - p,
                cov: -p,
                fourth_central: Some(
                    n * (p * q.powi(4) + p.powi(4) * q) + 3.0 * n * (n - 1.0) * p * p * q * q,
                ),
            }
        }
        WeightKind::Iid(law) => WeightMoments {
            mean: 1.0,
            var: law.variance(),
            cov: 0.0,
            fourth_central: law.fourth_central(),
        },
        WeightKind::Unit => WeightMoments {
            mean: 1.0,
            var: 0.0,
            cov: 0.0,
            fourth_central: Some(0.0),
        },
    }
}

/// Fills `out` (length `scheme.n`) with one weight row.
pub fn fill_weights<R: Rng + ?Sized>(rng: &mut R, scheme: &WeightScheme, out: &mut Vec<f64>) {
    out.clear();
    out.resize(scheme.n, 0.0);
    match scheme.kind {
        WeightKind::Multinomial => {
            let n = scheme.n;
            for _ in 0..n {
                out[rng.random_range(0..n)] += 1.0;
            }
        }
        WeightKind::Iid(IidWeight::Normal { variance }) => {
            let sd = variance.sqrt();
            for w in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *w = 1.0 + sd * z;
            }
        }
        WeightKind::Iid(IidWeight::Exponential) => {
            for w in out.iter_mut() {
                *w = Exp1.sample(rng);
            }
        }
        WeightKind::Unit => out.fill(1.0),
    }
}

/// One exchangeable weight row.
pub fn generate_weights<R: Rng + ?Sized>(rng: &mut R, scheme: &WeightScheme) -> Vec<f64> {
    let mut out = Vec::with_capacity(scheme.n);
    fill_weights(rng, scheme, &mut out);
    out
}
