//! Trajectory-matching nonlinear least squares.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::lm::{levenberg_marquardt, LeastSquares, LmConfig, LmOutcome};
use crate::ode::{jacobian_theta_fd, rk4_solve, OdeModel, ParamBounds, SolverOptions, Trajectory};
use crate::smoothing::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nls,
    TwoStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub method: Method,
    /// Final sum of squared residuals (weighted and scaled by `1/m` for two-step).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_used: usize,
    /// `true` for parameters the data carry no information about.
    pub unidentified: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlsConfig {
    pub lm: LmConfig,
    pub multistart: usize,
    pub seed: u64,
    /// First start; `None` uses the centre of the parameter box.
    pub initial: Option<Vec<f64>>,
    pub solver: SolverOptions,
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig {
            lm: LmConfig::default(),
            multistart: 8,
            seed: 0,
            initial: None,
            solver: SolverOptions::default(),
        }
    }
}

impl NlsConfig {
    pub fn validate(&self) -> Result<()> {
        self.lm.validate()?;
        if self.multistart == 0 {
            return Err(Error::Config("multistart must be at least 1".into()));
        }
        Ok(())
    }
}

/// Deterministic start points: the supplied (or central) start followed by
/// uniform draws inside the box. Unbounded coordinates are perturbed around
/// the first start instead.
pub fn multistart_points(bounds: &[ParamBounds], initial: Option<&[f64]>, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let first: Vec<f64> = match initial {
        Some(v) => v.iter().zip(bounds).map(|(x, b)| b.clamp(*x)).collect(),
        None => bounds.iter().map(|b| b.center()).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![first.clone()];
    for _ in 1..count {
        let p = bounds
            .iter()
            .zip(&first)
            .map(|(b, &c)| {
                if b.is_finite() {
                    rng.random_range(b.lower..=b.upper)
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b.clamp(c + z * c.abs().max(1.0))
                }
            })
            .collect();
        out.push(p);
    }
    out
}

/// Observation times mapped onto an integration grid that starts at `t0`.
pub(crate) struct TimeGrid {
    pub grid: Vec<f64>,
    pub index: Vec<usize>,
}

impl TimeGrid {
    pub fn new(t0: f64, times: &[f64]) -> Self {
        let mut grid = vec![t0];
        let mut index = Vec::with_capacity(times.len());
        for &t in times {
            if t > *grid.last().unwrap() {
                grid.push(t);
            }
            index.push(grid.len() - 1);
        }
        TimeGrid { grid, index }
    }
}

/// `F(t_i; theta)` for each observation, as rows.
pub fn fitted_states(
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    data: &ObservationSet,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let tg = TimeGrid::new(data.span().0, data.times());
    let traj: Trajectory = rk4_solve(model, theta, x0, &tg.grid, opts)?;
    Ok(tg.index.iter().map(|&g| traj.state(g).to_vec()).collect())
}

struct NlsProblem<'a> {
    model: &'a OdeModel,
    data: &'a ObservationSet,
    x0: &'a [f64],
    grid: TimeGrid,
    solver: SolverOptions,
}

impl LeastSquares for NlsProblem<'_> {
    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let traj = rk4_solve(self.model, theta, self.x0, &self.grid.grid, &self.solver)?;
        let p = self.data.dim();
        let mut r = Vec::with_capacity(self.data.len() * p);
        for (i, &g) in self.grid.index.iter().enumerate() {
            let f = traj.state(g);
            for k in 0..p {
                r.push(self.data.value(i, k) - f[k]);
            }
        }
        Ok(r)
    }

    fn jacobian(&self, theta: &[f64], rel: f64) -> Result<DMatrix<f64>> {
        let jac = jacobian_theta_fd(self.model, theta, self.x0, &self.grid.grid, rel, &self.solver)?;
        let p = self.data.dim();
        Ok(DMatrix::from_fn(self.data.len() * p, theta.len(), |row, j| {
            -jac.get(self.grid.index[row / p], row % p, j)
        }))
    }
}

fn best_of(outcomes: Vec<(usize, Result<LmOutcome>)>, method: Method) -> Result<EstimationResult> {
    let mut best: Option<(usize, LmOutcome)> = None;
    let mut last_err = None;
    for (i, o) in outcomes {
        match o {
            Ok(o) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => (o.converged, -o.objective) > (b.converged, -b.objective),
                };
                if better {
                    best = Some((i, o));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((i, o)) => Ok(EstimationResult {
            theta_hat: o.theta,
            method,
            objective: o.objective,
            iterations: o.iterations,
            converged: o.converged,
            start_used: i,
            unidentified: o.unidentified,
        }),
        None => Err(Error::NoConvergence(format!(
            "every start failed: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))),
    }
}

pub(crate) fn run_multistart<P: LeastSquares>(
    problem: &P,
    bounds: &[ParamBounds],
    initial: Option<&[f64]>,
    multistart: usize,
    seed: u64,
    lm: &LmConfig,
    method: Method,
) -> Result<EstimationResult> {
    let starts = multistart_points(bounds, initial, multistart, seed);
    let outcomes = starts
        .iter()
        .enumerate()
        .map(|(i, s)| (i, levenberg_marquardt(problem, s, bounds, lm)))
        .collect();
    best_of(outcomes, method)
}

/// Least-squares fit of the solved trajectory to all components of the data.
pub fn nls_estimate(model: &OdeModel, data: &ObservationSet, x0: &[f64], cfg: &NlsConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    if data.dim() != model.p() {
        return Err(Error::Dimension(format!("data has p = {}, model has p = {}", data.dim(), model.p())));
    }
    if x0.len() != model.p() {
        return Err(Error::Dimension(format!("x0 has length {}, model has p = {}", x0.len(), model.p())));
    }
    if let Some(init) = &cfg.initial {
        if init.len() != model.q() {
            return Err(Error::Dimension(format!("initial theta has length {}, model has q = {}", init.len(), model.q())));
        }
    }
    let problem = NlsProblem {
        model,
        data,
        x0,
        grid: TimeGrid::new(data.span().0, data.times()),
        solver: cfg.solver,
    };
    run_multistart(
        &problem,
        model.bounds(),
        cfg.initial.as_deref(),
        cfg.multistart,
        cfg.seed,
        &cfg.lm,
        Method::Nls,
    )
}
