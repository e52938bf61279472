//! Box-projected Levenberg-Marquardt for small least-squares problems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{fd_step, ParamBounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop when `max_j |(J^T r)_j|` falls below this.
    pub grad_tol: f64,
    /// Stop when the projected step is shorter than `step_tol * (|theta| + step_tol)`.
    pub step_tol: f64,
    pub initial_damping: f64,
    /// Relative step for finite-difference Jacobians.
    pub fd_rel_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iter: 200,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            initial_damping: 1e-3,
            fd_rel_step: 1e-6,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0 && self.initial_damping > 0.0 && self.fd_rel_step > 0.0) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A residual vector `r(theta)` with its Jacobian `dr/dtheta` (rows = residuals).
pub trait LeastSquares {
    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>>;

    fn jacobian(&self, theta: &[f64], fd_rel_step: f64) -> Result<DMatrix<f64>> {
        fd_jacobian(|th| self.residuals(th), theta, fd_rel_step)
    }
}

/// Central-difference Jacobian of a vector function.
pub fn fd_jacobian<F>(f: F, theta: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut th = theta.to_vec();
    let mut cols = Vec::with_capacity(theta.len());
    let mut rows = 0;
    for j in 0..theta.len() {
        let step = fd_step(theta[j], rel_step);
        th[j] = theta[j] + step;
        let plus = f(&th)?;
        th[j] = theta[j] - step;
        let minus = f(&th)?;
        th[j] = theta[j];
        rows = plus.len();
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect::<Vec<_>>(),
        );
    }
    if theta.is_empty() {
        rows = f(theta)?.len();
    }
    Ok(DMatrix::from_fn(rows, theta.len(), |i, j| cols[j][i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub theta: Vec<f64>,
    /// Final `sum r_i^2`.
    pub objective: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub converged: bool,
    /// Parameters whose Jacobian column vanished; they stay at their start values.
    pub unidentified: Vec<bool>,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn project(theta: &mut [f64], bounds: &[ParamBounds]) {
    for (v, b) in theta.iter_mut().zip(bounds) {
        *v = b.clamp(*v);
    }
}

pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(
    problem: &P,
    start: &[f64],
    bounds: &[ParamBounds],
    cfg: &LmConfig,
) -> Result<LmOutcome> {
    cfg.validate()?;
    let q = start.len();
    let mut theta = start.to_vec();
    project(&mut theta, bounds);
    let mut r = problem.residuals(&theta)?;
    let mut f = sum_sq(&r);
    if !f.is_finite() {
        return Err(Error::NoConvergence("objective is not finite at the start".into()));
    }
    let mut history = vec![f];
    let mut lambda = cfg.initial_damping;
    let mut unidentified = vec![false; q];
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < cfg.max_iter {
        let jac = problem.jacobian(&theta, cfg.fd_rel_step)?;
        let free: Vec<usize> = (0..q)
            .filter(|&j| {
                let zero = jac.column(j).iter().all(|v| *v == 0.0);
                unidentified[j] = zero;
                !zero
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let jf = DMatrix::from_fn(jac.nrows(), free.len(), |i, c| jac[(i, free[c])]);
        let g = jf.transpose() * &rv;
        if g.amax() <= cfg.grad_tol {
            converged = true;
            break;
        }
        let jtj = jf.transpose() * &jf;
        loop {
            let mut a = jtj.clone();
            for c in 0..free.len() {
                a[(c, c)] += lambda * jtj[(c, c)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e10 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            let mut cand = theta.clone();
            for (c, &j) in free.iter().enumerate() {
                cand[j] += delta[c];
            }
            project(&mut cand, bounds);
            let step_norm = cand.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step_norm <= cfg.step_tol * (theta_norm + cfg.step_tol) {
                converged = true;
                break 'outer;
            }
            let trial = problem.residuals(&cand).ok().map(|rc| (sum_sq(&rc), rc));
            match trial {
                Some((fc, rc)) if fc.is_finite() && fc < f => {
                    theta = cand;
                    r = rc;
                    f = fc;
                    history.push(f);
                    lambda = (lambda / 10.0).max(1e-15);
                    iterations += 1;
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e10 {
                        // no descent direction left at working precision
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(LmOutcome {
        theta,
        objective: f,
        iterations,
        converged,
        unidentified,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LeastSquares for Rosenbrock {
        fn residuals(&self, th: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![10.0 * (th[1] - th[0] * th[0]), 1.0 - th[0]])
        }
    }

    struct Ignores;

    impl LeastSquares for Ignores {
        fn residuals(&self, th: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![th[0] - 2.0, 3.0 * (th[0] - 2.0)])
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let b = vec![ParamBounds::UNBOUNDED; 2];
        let out = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &b, &LmConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.theta[0] - 1.0).abs() < 1e-6 && (out.theta[1] - 1.0).abs() < 1e-6, "{out:?}");
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn box_projection_holds() {
        let b = vec![ParamBounds::new(-2.0, 0.5), ParamBounds::UNBOUNDED];
        let out = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &b, &LmConfig::default()).unwrap();
        assert!(out.theta[0] <= 0.5);
        assert!((out.theta[0] - 0.5).abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn zero_column_is_flagged() {
        let b = vec![ParamBounds::UNBOUNDED; 2];
        let out = levenberg_marquardt(&Ignores, &[0.0, 7.0], &b, &LmConfig::default()).unwrap();
        assert_eq!(out.unidentified, vec![false, true]);
        assert_eq!(out.theta[1], 7.0);
        assert!((out.theta[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_iterations_at_minimum() {
        let b = vec![ParamBounds::UNBOUNDED; 2];
        let out = levenberg_marquardt(&Rosenbrock, &[1.0, 1.0], &b, &LmConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let j = fd_jacobian(|t| Rosenbrock.residuals(t), &[0.3, -0.2], 1e-6).unwrap();
        assert!((j[(0, 0)] - (-20.0 * 0.3)).abs() < 1e-7);
        assert!((j[(0, 1)] - 10.0).abs() < 1e-7);
        assert!((j[(1, 0)] + 1.0).abs() < 1e-7);
        assert_eq!(j[(1, 1)], 0.0);
    }
}
