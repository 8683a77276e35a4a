//! Limited-memory BFGS with Armijo backtracking.
//!
//! The objective writes its gradient into the provided buffer and returns the
//! value; `+∞` or NaN values are rejected by the line search.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when `‖g‖_∞ ≤ grad_tol · max(1, |f|)`.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers `f` by at most `f_tol · max(1, |f|)`.
    pub f_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 500,
            memory: 8,
            grad_tol: 1e-9,
            f_tol: 1e-13,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `false` only when the iteration cap was hit.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: n == 0,
        };
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];

    for iter in 0..opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol * fx.abs().max(1.0) {
            return Minimum {
                x,
                value: fx,
                iterations: iter,
                converged: true,
            };
        }

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha_buf[k] - b) * si);
        }

        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }

        let mut step = if history.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            trial.iter_mut().zip(&x).zip(&dir).for_each(|((t, xi), di)| *t = xi + step * di);
            let ft = f(&trial, &mut g_trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }

        let Some(f_new) = accepted else {
            if history.is_empty() {
                // no descent even along −g: stationary to working precision
                return Minimum {
                    x,
                    value: fx,
                    iterations: iter,
                    converged: true,
                };
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - f_new;
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        fx = f_new;
        if decrease <= opts.f_tol * fx.abs().max(1.0) {
            return Minimum {
                x,
                value: fx,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    Minimum {
        x,
        value: fx,
        iterations: opts.max_iters,
        converged: false,
    }
}
