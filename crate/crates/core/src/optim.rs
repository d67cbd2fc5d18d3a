//! Smoothed pinball loss and a limited-memory quasi-Newton minimizer with a
//! backtracking (Armijo) line search. Accepted steps never increase the
//! objective.

use std::collections::VecDeque;

/// Huber-smoothed pinball loss of prediction `z` against observation `y`.
///
/// Quadratic inside `|z - y| <= eps`, linear outside, weighted `1 - alpha`
/// above the observation and `alpha` below it.
#[inline]
pub fn smoothed_pinball(z: f64, y: f64, alpha: f64, eps: f64) -> f64 {
    let u = z - y;
    let h = if u.abs() <= eps {
        u * u / (2.0 * eps)
    } else {
        u.abs() - eps / 2.0
    };
    if u >= 0.0 {
        (1.0 - alpha) * h
    } else {
        alpha * h
    }
}

/// Derivative of [`smoothed_pinball`] with respect to `z`.
#[inline]
pub fn smoothed_pinball_grad(z: f64, y: f64, alpha: f64, eps: f64) -> f64 {
    let u = z - y;
    let dh = if u.abs() <= eps { u / eps } else { u.signum() };
    if u >= 0.0 {
        (1.0 - alpha) * dh
    } else {
        alpha * dh
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the relative decrease of one step falls below this.
    pub rel_tol: f64,
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 200,
            memory: 8,
            rel_tol: 1e-10,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and writes the gradient.
pub fn lbfgs<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if n == 0 || gnorm <= opts.grad_tol {
            break;
        }
        let mut d = two_loop(&g, &pairs);
        let mut slope = dot(&d, &g);
        if slope >= 0.0 || !slope.is_finite() {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = if pairs.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };

        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, yv, 1.0 / sy));
        }

        let decrease = fx - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        history.push(fx);
        if decrease <= opts.rel_tol * fx.abs().max(1e-300) {
            break;
        }
    }

    Minimum {
        x,
        value: fx,
        iterations,
        history,
    }
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}
