//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// L-BFGS settings. `c1`/`c2` are the sufficient-decrease and curvature
/// constants of the Wolfe conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Cap on line-search evaluations per iteration.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 100,
            grad_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 20,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig(
                "lbfgs memory and max_iters must be positive".into(),
            ));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "line-search constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }
}

/// Outcome of a minimization run. `trace` holds the objective value at x0
/// followed by every accepted iterate, so it is nonincreasing.
#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

struct HistoryEntry {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` from `x0`.
///
/// Uses the two-loop recursion over a bounded history and a strong-Wolfe
/// line search; when the curvature condition cannot be met the (s, y) pair
/// is skipped, and a non-descent direction falls back to steepest descent.
/// Accepted iterates never increase the objective.
///
/// Trial points may evaluate to `+∞` (the line search treats them as
/// rejected); a NaN value or gradient, or a non-finite objective at `x0`,
/// aborts with the last good iterate.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = f(&x);
    if !fx.is_finite() || gx.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite {
            iteration: 0,
            last_value: fx,
            last_point: x,
        });
    }
    let mut trace = vec![fx];
    let mut history: VecDeque<HistoryEntry> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        if norm(&gx) <= cfg.grad_tol {
            break;
        }

        let mut direction = two_loop_direction(&history, &gx, n);
        let mut dg = dot(&direction, &gx);
        if !(dg < 0.0) {
            // not a descent direction: steepest descent fallback
            direction = gx.iter().map(|v| -v).collect();
            dg = dot(&direction, &gx);
            if !(dg < 0.0) {
                break; // zero gradient within rounding
            }
        }

        // without curvature history a unit step along −g can be enormous;
        // scale the first trial to a unit-length move
        let alpha_init = if history.is_empty() {
            (1.0 / norm(&direction)).min(1.0)
        } else {
            1.0
        };

        let ls = match line_search(&mut f, &x, fx, &direction, dg, alpha_init, cfg) {
            Ok(Some(step)) => step,
            Ok(None) => {
                // no acceptable step along this direction; retry once along
                // steepest descent before giving up
                let sd: Vec<f64> = gx.iter().map(|v| -v).collect();
                let sd_dg = dot(&sd, &gx);
                let sd_alpha = (1.0 / norm(&sd)).min(1.0);
                match line_search(&mut f, &x, fx, &sd, sd_dg, sd_alpha, cfg)? {
                    Some(step) => step,
                    None => break,
                }
            }
            Err(e) => return Err(augment_nonfinite(e, iter, fx, &x)),
        };

        let (alpha, f_new, g_new, x_new) = ls;
        if g_new.iter().any(|v| v.is_nan()) || f_new.is_nan() {
            return Err(Error::NonFinite {
                iteration: iter,
                last_value: fx,
                last_point: x,
            });
        }
        debug_assert!(f_new <= fx);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            let rho = 1.0 / sy;
            history.push_back(HistoryEntry { s, y, rho });
        }
        let _ = alpha;
        x = x_new;
        fx = f_new;
        gx = g_new;
        trace.push(fx);
        iterations = iter + 1;
    }

    Ok(LbfgsResult {
        x,
        value: fx,
        iterations,
        trace,
    })
}

fn augment_nonfinite(e: Error, iteration: usize, last_value: f64, last_point: &[f64]) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite {
            iteration,
            last_value,
            last_point: last_point.to_vec(),
        },
        other => other,
    }
}

fn two_loop_direction(history: &VecDeque<HistoryEntry>, grad: &[f64], n: usize) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for entry in history.iter().rev() {
        let alpha = entry.rho * dot(&entry.s, &q);
        for (qi, yi) in q.iter_mut().zip(&entry.y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    // initial Hessian scaling from the most recent pair
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (entry, alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = entry.rho * dot(&entry.y, &q);
        for (qi, si) in q.iter_mut().zip(&entry.s) {
            *qi += (alpha - beta) * si;
        }
    }
    let mut d = vec![0.0; n];
    for (di, qi) in d.iter_mut().zip(&q) {
        *di = -qi;
    }
    d
}

type Step = (f64, f64, Vec<f64>, Vec<f64>);

/// Strong-Wolfe line search (bracket then zoom with cubic interpolation).
/// Returns `Ok(None)` when no acceptable step is found within the budget.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &[f64],
    f0: f64,
    d: &[f64],
    dg0: f64,
    alpha_init: f64,
    cfg: &LbfgsConfig,
) -> Result<Option<Step>>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let eval = |f: &mut F, alpha: f64| -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (fa, ga) = f(&xa);
        if fa.is_nan() || ga.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite {
                iteration: 0,
                last_value: f0,
                last_point: x.to_vec(),
            });
        }
        let da = dot(&ga, d);
        Ok((fa, da, ga, xa))
    };

    let c1 = cfg.c1;
    let c2 = cfg.c2;
    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = dg0;
    let mut alpha = alpha_init;
    let mut evals = 0;

    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;
    while evals < cfg.max_line_search {
        let (fa, da, ga, xa) = eval(f, alpha)?;
        evals += 1;
        if fa > f0 + c1 * alpha * dg0 || (evals > 1 && fa >= f_prev) {
            bracket = Some((alpha_prev, f_prev, d_prev, alpha, fa, da));
            break;
        }
        if da.abs() <= -c2 * dg0 {
            return Ok(Some((alpha, fa, ga, xa)));
        }
        if da >= 0.0 {
            bracket = Some((alpha, fa, da, alpha_prev, f_prev, d_prev));
            break;
        }
        alpha_prev = alpha;
        f_prev = fa;
        d_prev = da;
        alpha *= 2.0;
    }

    let Some((mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi, mut d_hi)) = bracket else {
        return Ok(None);
    };

    // zoom
    let mut best: Option<Step> = None;
    while evals < cfg.max_line_search {
        let mut trial = cubic_minimizer(lo, f_lo, d_lo, hi, f_hi, d_hi);
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let span = b - a;
        if !trial.is_finite() || trial <= a + 0.1 * span || trial >= b - 0.1 * span {
            trial = 0.5 * (a + b);
        }
        let (fa, da, ga, xa) = eval(f, trial)?;
        evals += 1;
        if fa > f0 + c1 * trial * dg0 || fa >= f_lo {
            hi = trial;
            f_hi = fa;
            d_hi = da;
        } else {
            if da.abs() <= -c2 * dg0 {
                return Ok(Some((trial, fa, ga, xa)));
            }
            if da * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = trial;
            f_lo = fa;
            d_lo = da;
            best = Some((trial, fa, ga, xa));
        }
        if span < 1e-16 {
            break;
        }
    }
    // curvature never satisfied within budget: accept the best
    // sufficient-decrease point if any (the (s, y) update will be skipped)
    Ok(best.filter(|s| s.1 < f0))
}

/// Minimizer of the cubic interpolating two (value, slope) samples.
fn cubic_minimizer(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64) -> f64 {
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq < 0.0 {
        return f64::NAN;
    }
    let d2 = d2_sq.sqrt() * (x2 - x1).signum();
    x2 - (x2 - x1) * (g2 + d2 - d1) / (g2 - g1 + 2.0 * d2)
}
