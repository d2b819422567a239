//! Quasi-Newton maximization with finite-difference derivatives.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::Posterior;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub max_evals: usize,
    /// Converged when `|grad|_inf <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Converged when the accepted step is at most this long (inf-norm).
    pub step_tol: f64,
    /// Central-difference step relative to `max(|theta_k|, 1)`.
    pub fd_rel_step: f64,
    /// Compute the observed information at the maximum.
    pub information: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { max_evals: 5000, grad_tol: 1e-4, step_tol: 1e-8, fd_rel_step: 1e-5, information: true }
    }
}

/// Output of [`maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub evals: usize,
    pub iterations: usize,
}

/// Negated Hessian of the log-posterior and the standard errors it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Information {
    pub matrix: Vec<Vec<f64>>,
    /// `sqrt(diag(matrix^{-1}))`; `None` when the matrix is not positive
    /// definite (a saddle, or a maximum on the boundary).
    pub std_devs: Option<Vec<f64>>,
    pub evals: usize,
}

/// A MAP estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub std_devs: Option<Vec<f64>>,
    pub log_post: f64,
    pub converged: bool,
    pub evals: usize,
    #[serde(skip)]
    pub iterations: usize,
    #[serde(skip)]
    pub information: Option<Vec<Vec<f64>>>,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

struct Counted<F> {
    f: F,
    evals: AtomicUsize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Counted<F> {
    fn call(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.f)(x)
    }

    fn count(&self) -> usize {
        self.evals.load(Ordering::Relaxed)
    }
}

fn fd_step(x: f64, rel: f64, floor: f64) -> f64 {
    rel * x.abs().max(floor)
}

/// Central-difference gradient with steps `rel * max(|x_k|, 1)`. Falls back
/// to a one-sided difference where one neighbour is not finite.
pub fn fd_gradient<F: Fn(&[f64]) -> f64 + Sync>(f: F, x: &[f64], fx: f64, rel: f64) -> Vec<f64> {
    (0..x.len())
        .into_par_iter()
        .map(|k| {
            let h = fd_step(x[k], rel, 1.0);
            let mut xp = x.to_vec();
            xp[k] += h;
            let fp = f(&xp);
            xp[k] = x[k] - h;
            let fm = f(&xp);
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - fx) / h,
                (false, true) => (fx - fm) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// Symmetrized central-difference Hessian with steps
/// `rel * max(|x_k|, 1e-2)`.
pub fn fd_hessian<F: Fn(&[f64]) -> f64 + Sync>(f: F, x: &[f64], fx: f64, rel: f64) -> Vec<Vec<f64>> {
    let p = x.len();
    let h: Vec<f64> = x.iter().map(|&v| fd_step(v, rel, 1e-2)).collect();
    let eval = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(k, s) in moves {
            y[k] += s * h[k];
        }
        f(&y)
    };
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                (eval(&[(i, 1.0)]) - 2.0 * fx + eval(&[(i, -1.0)])) / (h[i] * h[i])
            } else {
                let pp = eval(&[(i, 1.0), (j, 1.0)]);
                let pm = eval(&[(i, 1.0), (j, -1.0)]);
                let mp = eval(&[(i, -1.0), (j, 1.0)]);
                let mm = eval(&[(i, -1.0), (j, -1.0)]);
                (pp - pm - mp + mm) / (4.0 * h[i] * h[j])
            }
        })
        .collect();
    let mut out = vec![vec![0.0; p]; p];
    for (&(i, j), &v) in pairs.iter().zip(&entries) {
        out[i][j] = v;
        out[j][i] = v;
    }
    out
}

/// Lower Cholesky factor of a small dense matrix, or `None` if it is not
/// positive definite.
fn dense_cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / l[j][j];
        }
    }
    Some(l)
}

/// `diag(M^{-1})` for symmetric positive definite `M`.
fn inverse_diagonal(m: &[Vec<f64>]) -> Option<Vec<f64>> {
    let l = dense_cholesky(m)?;
    let n = m.len();
    // diag(M^{-1})_k = |L^{-1} e_k|^2
    Some(
        (0..n)
            .map(|k| {
                let mut z = vec![0.0; n];
                z[k] = 1.0 / l[k][k];
                for i in k + 1..n {
                    let s: f64 = (k..i).map(|j| l[i][j] * z[j]).sum();
                    z[i] = -s / l[i][i];
                }
                z.iter().map(|v| v * v).sum()
            })
            .collect(),
    )
}

/// Observed information of `f` at `x` (negated Hessian, step
/// `1e-3 * max(|x_k|, 1e-2)`).
pub fn observed_information<F: Fn(&[f64]) -> f64 + Sync>(f: F, x: &[f64]) -> Information {
    let counted = Counted { f, evals: AtomicUsize::new(0) };
    let fx = counted.call(x);
    let hess = fd_hessian(|y: &[f64]| counted.call(y), x, fx, 1e-3);
    let matrix: Vec<Vec<f64>> = hess.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let std_devs = inverse_diagonal(&matrix).map(|d| d.iter().map(|v| v.sqrt()).collect());
    Information { matrix, std_devs, evals: counted.count() }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Maximize `f` from `x0` by BFGS with finite-difference gradients and a
/// backtracking line search. Points where `f` is not finite are treated as
/// infeasible and the line search retreats from them.
pub fn maximize<F: Fn(&[f64]) -> f64 + Sync>(f: F, x0: &[f64], opts: &MapOptions) -> Result<Maximum> {
    let counted = Counted { f, evals: AtomicUsize::new(0) };
    // minimize phi = -f
    let phi = |x: &[f64]| -counted.call(x);
    let grad = |x: &[f64], fx: f64| -> Vec<f64> {
        fd_gradient(|y: &[f64]| counted.call(y), x, -fx, opts.fd_rel_step).iter().map(|g| -g).collect()
    };
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = phi(&x);
    if !fx.is_finite() {
        return Err(Error::Infeasible(format!("log-posterior is not finite at the start {x0:?}")));
    }
    let mut g = grad(&x, fx);
    let identity = |scale: f64| -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        (0..n).for_each(|i| h[i * n + i] = scale);
        h
    };
    let mut hinv = identity(1.0);
    let mut scaled = false;
    let mut fresh = true;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        if inf_norm(&g) <= opts.grad_tol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
        if counted.count() >= opts.max_evals {
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        if dot(&d, &g) >= 0.0 {
            hinv = identity(1.0);
            scaled = false;
            d = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&d, &g);
        let dn = inf_norm(&d);
        let mut alpha = if scaled { 1.0 } else { (0.1 * inf_norm(&x).max(1.0) / dn).min(1.0) };
        let accepted = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let fnew = phi(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                break Some((xn, fnew));
            }
            alpha *= 0.5;
            if alpha * dn <= opts.step_tol || counted.count() >= opts.max_evals {
                break None;
            }
        };
        let Some((xn, fnew)) = accepted else {
            if counted.count() >= opts.max_evals {
                break;
            }
            if fresh {
                // no descent even along the steepest direction
                converged = true;
                break;
            }
            hinv = identity(1.0);
            scaled = false;
            fresh = true;
            continue;
        };
        fresh = false;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let gn = grad(&xn, fnew);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        x = xn;
        fx = fnew;
        g = gn;
        if inf_norm(&s) <= opts.step_tol {
            converged = true;
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                hinv = identity(sy / dot(&y, &y));
                scaled = true;
            }
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
    }
    Ok(Maximum {
        theta: x,
        value: -fx,
        gradient: g.iter().map(|v| -v).collect(),
        converged,
        evals: counted.count(),
        iterations,
    })
}

/// MAP estimate of `theta` starting from `theta0`.
pub fn map_estimate(posterior: &Posterior, theta0: &[f64], opts: &MapOptions) -> Result<FitResult> {
    posterior.model().layout().check_len(theta0)?;
    let f = |t: &[f64]| posterior.log_posterior(t);
    let max = maximize(f, theta0, opts)?;
    let (std_devs, information, extra) = if opts.information {
        let info = observed_information(f, &max.theta);
        (info.std_devs, Some(info.matrix), info.evals)
    } else {
        (None, None, 0)
    };
    Ok(FitResult {
        theta: max.theta,
        std_devs,
        log_post: max.value,
        converged: max.converged,
        evals: max.evals + extra,
        iterations: max.iterations,
        information,
    })
}
