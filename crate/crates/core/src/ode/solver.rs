//! Fixed-step classical Runge-Kutta integration with cubic Hermite dense output.
//!
//! Each interval between consecutive grid points is split into equal substeps
//! no longer than [`SolverOptions::max_step`]. States and right-hand side values
//! are kept at the grid points only; evaluation between them uses the cubic
//! Hermite interpolant built from those values, which is fourth-order accurate
//! and so matches the integrator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::model::OdeModel;

/// Default number of substeps across the whole grid span.
pub const DEFAULT_SUBSTEPS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Largest allowed substep. `None` means `(T - t0) / 2048`.
    pub max_step: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_step: None }
    }
}

impl SolverOptions {
    pub fn with_max_step(max_step: f64) -> Self {
        SolverOptions {
            max_step: Some(max_step),
        }
    }

    fn resolve(&self, span: f64) -> f64 {
        self.max_step.unwrap_or(span / DEFAULT_SUBSTEPS as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    CubicHermite,
    Linear,
}

/// A solved path `F(t; theta)` on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Vec<f64>,
    p: usize,
    states: Vec<f64>,
    derivs: Vec<f64>,
    theta: Vec<f64>,
    x0: Vec<f64>,
    interpolation: Interpolation,
    max_step: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Substep size actually used by the integrator.
    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    /// State row at grid index `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.p..(i + 1) * self.p]
    }

    /// Right-hand side value at grid index `i`.
    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.p..(i + 1) * self.p]
    }

    /// Switch the dense-output rule. Values at grid points are unaffected.
    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.p];
        self.at_into(t, &mut out)?;
        Ok(out)
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let start = self.grid[0];
        let end = *self.grid.last().unwrap();
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        // index of the left end of the bracketing interval
        let idx = self.grid.partition_point(|&g| g <= t);
        if idx == 0 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        let i = idx - 1;
        if self.grid[i] == t || i + 1 == self.grid.len() {
            out.copy_from_slice(self.state(i));
            return Ok(());
        }
        let (t_a, t_b) = (self.grid[i], self.grid[i + 1]);
        let dt = t_b - t_a;
        let s = (t - t_a) / dt;
        let (xa, xb) = (self.state(i), self.state(i + 1));
        match self.interpolation {
            Interpolation::Linear => {
                for k in 0..self.p {
                    out[k] = xa[k] + s * (xb[k] - xa[k]);
                }
            }
            Interpolation::CubicHermite => {
                let (da, db) = (self.derivative(i), self.derivative(i + 1));
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                for k in 0..self.p {
                    out[k] = h00 * xa[k] + h10 * dt * da[k] + h01 * xb[k] + h11 * dt * db[k];
                }
            }
        }
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid { index: 0 });
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::Grid { index: i + 1 });
        }
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::Grid { index: 0 });
    }
    Ok(())
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrate `model` from `x0` at `grid[0]` across `grid` with classical RK4.
pub fn rk4_solve(
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Trajectory> {
    check_grid(grid)?;
    let p = model.p();
    if x0.len() != p {
        return Err(Error::Dimension(format!("x0 has length {}, model has p = {p}", x0.len())));
    }
    if theta.len() != model.q() {
        return Err(Error::Dimension(format!(
            "theta has length {}, model has q = {}",
            theta.len(),
            model.q()
        )));
    }
    let span = grid[grid.len() - 1] - grid[0];
    let max_step = opts.resolve(span);
    if grid.len() > 1 && !(max_step > 0.0) {
        return Err(Error::Config(format!("max_step must be positive, got {max_step}")));
    }

    let n = grid.len();
    let mut states = Vec::with_capacity(n * p);
    let mut derivs = Vec::with_capacity(n * p);
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; p];
    let mut k2 = vec![0.0; p];
    let mut k3 = vec![0.0; p];
    let mut k4 = vec![0.0; p];
    let mut tmp = vec![0.0; p];

    model.rhs_into(grid[0], &x, theta, &mut k1);
    if !all_finite(&x) || !all_finite(&k1) {
        return Err(Error::NonFiniteState { t: grid[0] });
    }
    states.extend_from_slice(&x);
    derivs.extend_from_slice(&k1);

    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let steps = (((tb - ta) / max_step) - 1e-9).ceil().max(1.0) as usize;
        let dt = (tb - ta) / steps as f64;
        for s in 0..steps {
            let t = ta + s as f64 * dt;
            // k1 already holds f(t, x)
            for i in 0..p {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            model.rhs_into(t + 0.5 * dt, &tmp, theta, &mut k2);
            for i in 0..p {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            model.rhs_into(t + 0.5 * dt, &tmp, theta, &mut k3);
            for i in 0..p {
                tmp[i] = x[i] + dt * k3[i];
            }
            model.rhs_into(t + dt, &tmp, theta, &mut k4);
            for i in 0..p {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t_next = if s + 1 == steps { tb } else { ta + (s + 1) as f64 * dt };
            model.rhs_into(t_next, &x, theta, &mut k1);
            if !all_finite(&x) || !all_finite(&k1) || !all_finite(&k2) || !all_finite(&k3) || !all_finite(&k4) {
                return Err(Error::NonFiniteState { t: t_next });
            }
        }
        states.extend_from_slice(&x);
        derivs.extend_from_slice(&k1);
    }

    Ok(Trajectory {
        grid: grid.to_vec(),
        p,
        states,
        derivs,
        theta: theta.to_vec(),
        x0: x0.to_vec(),
        interpolation: Interpolation::CubicHermite,
        max_step,
    })
}

/// Solve on an equispaced grid of `steps + 1` points spanning `[t0, t1]`, one substep per interval.
pub fn solve_uniform(
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    let grid = uniform_grid(t0, t1, steps + 1);
    let opts = SolverOptions::with_max_step((t1 - t0) / steps as f64);
    rk4_solve(model, theta, x0, &grid, &opts)
}

/// `len` equispaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (len - 1) as f64;
            (0..len)
                .map(|i| if i + 1 == len { b } else { a + i as f64 * step })
                .collect()
        }
    }
}

/// Finite-difference step for parameter `value`.
pub fn fd_step(value: f64, rel_step: f64) -> f64 {
    rel_step * value.abs().max(1.0)
}

/// `dF/dtheta` at every grid time, stored as `[time][state][parameter]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJacobian {
    n_times: usize,
    p: usize,
    q: usize,
    data: Vec<f64>,
}

impl ParamJacobian {
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, time: usize, state: usize, param: usize) -> f64 {
        self.data[(time * self.p + state) * self.q + param]
    }
}

/// Central finite-difference parameter Jacobian of the solved trajectory.
pub fn jacobian_theta_fd(
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    grid: &[f64],
    rel_step: f64,
    opts: &SolverOptions,
) -> Result<ParamJacobian> {
    check_grid(grid)?;
    let (p, q, n) = (model.p(), model.q(), grid.len());
    let mut data = vec![0.0; n * p * q];
    let mut th = theta.to_vec();
    for j in 0..q {
        let step = fd_step(theta[j], rel_step);
        th[j] = theta[j] + step;
        let plus = rk4_solve(model, &th, x0, grid, opts)?;
        th[j] = theta[j] - step;
        let minus = rk4_solve(model, &th, x0, grid, opts)?;
        th[j] = theta[j];
        for i in 0..n {
            let (a, b) = (plus.state(i), minus.state(i));
            for k in 0..p {
                data[(i * p + k) * q + j] = (a[k] - b[k]) / (2.0 * step);
            }
        }
    }
    Ok(ParamJacobian { n_times: n, p, q, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> OdeModel {
        OdeModel::new("decay", 1, 1, |_t, x, th, out| out[0] = th[0] * x[0])
            .with_analytic_solution(|dt, th, x0| vec![x0[0] * (th[0] * dt).exp()])
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let traj = rk4_solve(&decay(), &[-0.6], &[1.0], &[0.0, 1.0], &SolverOptions::default()).unwrap();
        assert!((traj.state(1)[0] - (-0.6f64).exp()).abs() < 1e-8);
        assert!((traj.state(1)[0] - 0.548812).abs() < 1e-6);
    }

    #[test]
    fn single_point_grid_returns_x0() {
        let traj = rk4_solve(&decay(), &[-0.6], &[2.5], &[0.3], &SolverOptions::default()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.state(0), &[2.5]);
        assert_eq!(traj.at(0.3).unwrap(), vec![2.5]);
    }

    #[test]
    fn rejects_non_increasing_grid() {
        let err = rk4_solve(&decay(), &[-0.6], &[1.0], &[0.0, 0.5, 0.5], &SolverOptions::default());
        assert_eq!(err.unwrap_err(), Error::Grid { index: 2 });
    }

    #[test]
    fn blow_up_is_reported() {
        let m = OdeModel::new("blowup", 1, 0, |_t, x, _th, out| out[0] = x[0] * x[0]);
        let err = rk4_solve(&m, &[], &[1.0], &[0.0, 2.0], &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn interpolation_exact_at_grid_and_endpoints() {
        let grid = uniform_grid(0.0, 1.0, 11);
        let traj = rk4_solve(&decay(), &[-0.6], &[1.0], &grid, &SolverOptions::default()).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            assert_eq!(traj.at(t).unwrap(), traj.state(i).to_vec());
        }
        assert_eq!(traj.at(1.0).unwrap(), traj.state(10).to_vec());
        assert!(matches!(traj.at(1.0 + 1e-12), Err(Error::OutOfRange { .. })));
        assert!(matches!(traj.at(-1e-12), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn hermite_midpoint_is_fourth_order() {
        let grid = uniform_grid(0.0, 1.0, 11);
        let traj = rk4_solve(&decay(), &[-0.6], &[1.0], &grid, &SolverOptions::default()).unwrap();
        let t = 0.35;
        let exact = (-0.6f64 * t).exp();
        // Hermite error bound: h^4/384 * max|x''''| with h = 0.1
        let err = (traj.at(t).unwrap()[0] - exact).abs();
        assert!(err < 0.1f64.powi(4) / 384.0 * 0.6f64.powi(4) * 1.01 + 1e-12, "err = {err}");
        let lin = traj.clone().with_interpolation(Interpolation::Linear);
        let lin_err = (lin.at(t).unwrap()[0] - exact).abs();
        assert!(lin_err > err);
        assert!(lin_err < 0.1f64.powi(2) / 8.0 * 0.36);
    }

    #[test]
    fn parameter_jacobian_of_exponential() {
        // F = exp(theta t), dF/dtheta = t exp(theta t); at theta = 0, t = 1 this is 1.
        let grid = uniform_grid(0.0, 1.0, 5);
        let jac = jacobian_theta_fd(&decay(), &[0.0], &[1.0], &grid, 1e-6, &SolverOptions::default()).unwrap();
        assert!((jac.get(4, 0, 0) - 1.0).abs() < 1e-6);
        assert!((jac.get(2, 0, 0) - 0.5).abs() < 1e-6);
        assert_eq!(jac.get(0, 0, 0), 0.0);
    }

    #[test]
    fn empty_parameter_jacobian() {
        let m = OdeModel::new("const", 1, 0, |_t, _x, _th, out| out[0] = 1.0);
        let jac = jacobian_theta_fd(&m, &[], &[0.0], &[0.0, 1.0], 1e-6, &SolverOptions::default()).unwrap();
        assert!(jac.is_empty());
        assert_eq!(jac.q(), 0);
    }
}
