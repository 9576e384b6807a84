//! Reference implementations used only by the integration tests. They are
//! written for clarity, not speed, and share no code with the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..400 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

/// Smallest value `v` with weight below `v` and weight above `v` both at
/// most half the total, by a double loop over all values.
pub fn brute_weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut best: Option<f64> = None;
    for (&v, &wv) in values.iter().zip(weights) {
        if wv == 0.0 {
            continue;
        }
        let mut below = 0.0;
        let mut above = 0.0;
        for (&u, &w) in values.iter().zip(weights) {
            if u < v {
                below += w;
            } else if u > v {
                above += w;
            }
        }
        if 2.0 * below <= total && 2.0 * above <= total {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best.expect("some value is a weighted median")
}

/// `sup_x |F_a(x) - F_b(x)|`, evaluating both ECDFs at every sample point.
pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

/// `2 sum_{k=1}^{K} (-1)^{k-1} exp(-2 k^2 lambda^2)`, stopping at the first
/// term below `1e-16`.
pub fn kolmogorov_series(lambda: f64) -> f64 {
    let mut s = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 || k > 100_000.0 {
            break;
        }
        k += 1.0;
    }
    2.0 * s
}

/// ARCH criteria written directly from their definitions.
pub fn reference_arch_objective(c0: f64, b: &[f64], x: &[f64], variant: &str) -> f64 {
    let p = b.len();
    let mut total = 0.0;
    for t in p..x.len() {
        let mut s2 = c0;
        for i in 1..=p {
            s2 += b[i - 1] * x[t - i] * x[t - i];
        }
        let x2 = x[t] * x[t];
        total += match variant {
            "gaussian_nll" => s2.ln() + x2 / s2,
            "lade1" => (x2 / s2 - 1.0).abs(),
            "lade2" => (x2.ln() - s2.ln()).abs(),
            "lade3" => (x2 - s2).abs(),
            other => panic!("unknown variant {other}"),
        };
    }
    total
}

/// Exact `(var, cov, fourth central)` of `Mult(n; 1/n, ..., 1/n)` by
/// summing over every composition of `n` into `n` parts.
pub fn multinomial_enumeration(n: usize) -> (f64, f64, f64) {
    fn rec(n: usize, left: usize, slot: usize, counts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot == n - 1 {
            counts.push(left);
            out.push(counts.clone());
            counts.pop();
            return;
        }
        for c in 0..=left {
            counts.push(c);
            rec(n, left - c, slot + 1, counts, out);
            counts.pop();
        }
    }
    let mut rows = Vec::new();
    rec(n, n, 0, &mut Vec::new(), &mut rows);
    let ln_fact = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let (mut var, mut cov, mut fourth) = (0.0, 0.0, 0.0);
    for counts in rows {
        let ln_p = ln_fact(n) - counts.iter().map(|&c| ln_fact(c)).sum::<f64>()
            - n as f64 * (n as f64).ln();
        let p = ln_p.exp();
        let d1 = counts[0] as f64 - 1.0;
        let d2 = counts[1] as f64 - 1.0;
        var += p * d1 * d1;
        cov += p * d1 * d2;
        fourth += p * d1.powi(4);
    }
    (var, cov, fourth)
}

/// AR(1) path with standard normal innovations and `X_1 = e_1`.
pub fn ar1_path(theta: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        prev = theta * prev + e;
        x.push(prev);
    }
    x
}

pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        (s[k / 2 - 1] + s[k / 2]) / 2.0
    }
}
