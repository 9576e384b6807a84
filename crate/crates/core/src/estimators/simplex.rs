//! Derivative-free minimization over `{c0 > 0, b_i >= 0}`.
//!
//! The search runs a Nelder-Mead simplex on unconstrained coordinates
//! `u`, mapped to the feasible box by `c0 = exp(u_0)` and
//! `b_i = softplus(u_i) = ln(1 + e^{u_i})`.

use rand_distr::{Distribution, StandardNormal};

use super::EstimatorResult;
use crate::error::{Error, Result};
use crate::rand_weights::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    /// Number of starts. The first uses the initial point as given, the
    /// others jitter it in the unconstrained coordinates.
    pub restarts: usize,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Stop once every vertex lies within this sup-norm distance of the best
    /// vertex (unconstrained coordinates).
    pub tol: f64,
    /// Edge length of the initial simplex (unconstrained coordinates).
    pub initial_step: f64,
    /// Standard deviation of the restart jitter.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_evals: 10_000,
            tol: 1e-8,
            initial_step: 0.25,
            jitter: 0.5,
            seed: 0x5EED,
        }
    }
}

const SOFTPLUS_LINEAR: f64 = 36.0;

fn softplus(u: f64) -> f64 {
    if u > SOFTPLUS_LINEAR {
        u
    } else {
        u.exp().ln_1p()
    }
}

fn softplus_inv(b: f64) -> f64 {
    // b = 0 sits at u = -inf; start a little inside instead.
    let b = b.max(1e-10);
    if b > SOFTPLUS_LINEAR {
        b
    } else {
        b.exp_m1().ln()
    }
}

fn to_params(u: &[f64], out: &mut [f64]) {
    out[0] = u[0].exp();
    for i in 1..u.len() {
        out[i] = softplus(u[i]);
    }
}

fn to_free(theta: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(theta.len());
    u.push(theta[0].max(f64::MIN_POSITIVE).ln());
    u.extend(theta[1..].iter().map(|b| softplus_inv(*b)));
    u
}

struct Run {
    u: Vec<f64>,
    f: f64,
    converged: bool,
    iterations: usize,
}

/// Evaluates `objective` in unconstrained coordinates; non-finite values
/// count as `+inf`.
struct Mapped<'a, F> {
    objective: &'a F,
    buf: Vec<f64>,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Mapped<'_, F> {
    fn eval(&mut self, u: &[f64]) -> f64 {
        self.evals += 1;
        to_params(u, &mut self.buf);
        let v = (self.objective)(&self.buf);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    obj: &mut Mapped<'_, F>,
    start: Vec<f64>,
    opts: &SimplexOptions,
    mut history: Option<&mut Vec<f64>>,
) -> Run {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let d = start.len();
    let budget_end = obj.evals + opts.max_evals;
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    verts.push(start.clone());
    for i in 0..d {
        let mut v = start.clone();
        v[i] += opts.initial_step;
        verts.push(v);
    }
    let mut fs: Vec<f64> = verts.iter().map(|v| obj.eval(v)).collect();
    let mut order: Vec<usize> = (0..=d).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; d];
    let point = |c: &[f64], toward: &[f64], coef: f64| -> Vec<f64> {
        c.iter().zip(toward).map(|(ci, ti)| ci + coef * (ti - ci)).collect()
    };

    loop {
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        let best = order[0];
        if let Some(h) = history.as_deref_mut() {
            h.push(fs[best]);
        }
        let diameter = order[1..]
            .iter()
            .flat_map(|&i| verts[i].iter().zip(&verts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol && fs[best].is_finite() {
            converged = true;
            break;
        }
        if obj.evals >= budget_end {
            break;
        }
        iterations += 1;

        let worst = order[d];
        let second_worst = order[d - 1];
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..d] {
            for (c, v) in centroid.iter_mut().zip(&verts[i]) {
                *c += v / d as f64;
            }
        }

        let xr = point(&centroid, &verts[worst], -ALPHA);
        let fr = obj.eval(&xr);
        if fr < fs[best] {
            let xe = point(&centroid, &xr, GAMMA);
            let fe = obj.eval(&xe);
            if fe < fr {
                verts[worst] = xe;
                fs[worst] = fe;
            } else {
                verts[worst] = xr;
                fs[worst] = fr;
            }
            continue;
        }
        if fr < fs[second_worst] {
            verts[worst] = xr;
            fs[worst] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < fs[worst] {
            let xc = point(&centroid, &xr, RHO);
            let fc = obj.eval(&xc);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = point(&centroid, &verts[worst], RHO);
            let fc = obj.eval(&xc);
            let ok = fc < fs[worst];
            (xc, fc, ok)
        };
        if accept {
            verts[worst] = xc;
            fs[worst] = fc;
            continue;
        }
        let anchor = verts[best].clone();
        for &i in &order[1..] {
            verts[i] = point(&anchor, &verts[i], SIGMA);
            fs[i] = obj.eval(&verts[i]);
        }
    }

    let best = order
        .iter()
        .copied()
        .min_by(|&a, &b| fs[a].total_cmp(&fs[b]))
        .expect("simplex is non-empty");
    Run {
        u: verts[best].clone(),
        f: fs[best],
        converged,
        iterations,
    }
}

fn minimize_impl<F: Fn(&[f64]) -> f64>(
    objective: &F,
    init: &[f64],
    opts: &SimplexOptions,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<EstimatorResult> {
    if init.is_empty() {
        return Err(Error::EmptyInput("minimize_box_positive: init"));
    }
    if !(init[0] > 0.0) || init[1..].iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "initial point must satisfy c0 > 0 and b_i >= 0, got {init:?}"
        )));
    }
    if opts.restarts == 0 || opts.max_evals == 0 {
        return Err(Error::InvalidParameter(
            "simplex needs at least one start and a positive evaluation budget".into(),
        ));
    }
    let mut mapped = Mapped {
        objective,
        buf: vec![0.0; init.len()],
        evals: 0,
    };
    let base = to_free(init);
    let jitter_root = RngStream::new(opts.seed);
    let mut best: Option<Run> = None;
    let mut iterations = 0;
    for r in 0..opts.restarts {
        let start = if r == 0 {
            base.clone()
        } else {
            let mut rng = jitter_root.child(r as u64).rng();
            base.iter()
                .map(|u| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    u + opts.jitter * z
                })
                .collect()
        };
        let mut hist = trace.as_ref().map(|_| Vec::new());
        let run = nelder_mead(&mut mapped, start, opts, hist.as_mut());
        if let (Some(t), Some(h)) = (trace.as_deref_mut(), hist) {
            t.push(h);
        }
        iterations += run.iterations;
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    if !best.f.is_finite() {
        return Err(Error::Solver(
            "objective is non-finite at every start".into(),
        ));
    }
    let mut estimate = vec![0.0; init.len()];
    to_params(&best.u, &mut estimate);
    Ok(EstimatorResult {
        objective: objective(&estimate),
        estimate,
        converged: best.converged,
        iterations,
        restarts_used: opts.restarts,
    })
}

/// Minimizes `objective` over `theta[0] > 0`, `theta[i] >= 0` (i >= 1).
///
/// Returns the best terminal vertex over all starts. `converged` reports
/// whether that start ended on the simplex-diameter rule rather than the
/// evaluation budget.
pub fn minimize_box_positive<F: Fn(&[f64]) -> f64>(
    objective: F,
    init: &[f64],
    opts: &SimplexOptions,
) -> Result<EstimatorResult> {
    minimize_impl(&objective, init, opts, None)
}

/// As [`minimize_box_positive`], also returning the best-vertex objective
/// value after every iteration, one vector per start.
pub fn minimize_box_positive_traced<F: Fn(&[f64]) -> f64>(
    objective: F,
    init: &[f64],
    opts: &SimplexOptions,
) -> Result<(EstimatorResult, Vec<Vec<f64>>)> {
    let mut trace = Vec::new();
    let res = minimize_impl(&objective, init, opts, Some(&mut trace))?;
    Ok((res, trace))
}
