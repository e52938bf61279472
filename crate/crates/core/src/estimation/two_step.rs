//! Two-step collocation: smooth the data, then match the model's `k`-th
//! right-hand side to the smoothed derivative on a fine pseudo-grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::lm::{LeastSquares, LmConfig};
use crate::estimation::nls::{run_multistart, EstimationResult, Method};
use crate::ode::{uniform_grid, OdeModel};
use crate::smoothing::{
    local_linear_into, local_quadratic_deriv_into, rot_bandwidth_detailed, BandwidthOptions, ObservationSet,
};

/// Piecewise-linear weight: 1 on the central plateau, ramping to 0 over the
/// outer `delta_w` fraction of the span at each end.
pub fn weight_function(t: f64, span: (f64, f64), delta_w: f64) -> f64 {
    let (a, b) = span;
    let ramp = delta_w * (b - a);
    if t <= a || t >= b {
        return 0.0;
    }
    if ramp <= 0.0 {
        return 1.0;
    }
    ((t - a) / ramp).min((b - t) / ramp).min(1.0)
}

/// Default pseudo-grid size `2 floor(n^(4/3))`.
pub fn default_grid_size(n: usize) -> usize {
    // exact integer floor of the cube root of n^4
    let n4 = (n as u128).pow(4);
    let mut a = (n as f64).powf(4.0 / 3.0).floor() as u128;
    while a * a * a > n4 {
        a -= 1;
    }
    while (a + 1).pow(3) <= n4 {
        a += 1;
    }
    2 * a as usize
}

/// Default collocation bandwidth from a plug-in `h_opt`: `h_opt n^(-2/15) ln^(1/2) n`.
pub fn collocation_bandwidth(h_opt: f64, n: usize) -> f64 {
    let n = n as f64;
    h_opt * n.powf(-2.0 / 15.0) * n.ln().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepConfig {
    /// Zero-based component whose equation is matched.
    pub component: usize,
    /// Pseudo-grid size; `None` means `2 floor(n^(4/3))`.
    pub m: Option<usize>,
    /// Smoothing bandwidth for every component; `None` derives one per component.
    pub h_e: Option<f64>,
    pub delta_w: f64,
    pub lm: LmConfig,
    pub multistart: usize,
    pub seed: u64,
    pub initial: Option<Vec<f64>>,
    pub bandwidth: BandwidthOptions,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        TwoStepConfig {
            component: 0,
            m: None,
            h_e: None,
            delta_w: 0.1,
            lm: LmConfig::default(),
            multistart: 8,
            seed: 0,
            initial: None,
            bandwidth: BandwidthOptions::default(),
        }
    }
}

impl TwoStepConfig {
    pub fn for_component(component: usize) -> Self {
        TwoStepConfig {
            component,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lm.validate()?;
        if !(self.delta_w > 0.0 && self.delta_w < 0.5) {
            return Err(Error::Config(format!("weight ramp fraction must lie in (0, 0.5), got {}", self.delta_w)));
        }
        if self.multistart == 0 {
            return Err(Error::Config("multistart must be at least 1".into()));
        }
        if let Some(h) = self.h_e {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Bandwidth(h));
            }
        }
        Ok(())
    }
}

/// Smoothed state and derivative on the collocation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationCurves {
    pub component: usize,
    pub grid: Vec<f64>,
    /// `X(t*_j)` rows, all components.
    pub states: Vec<Vec<f64>>,
    /// `X'_k(t*_j)`.
    pub derivative: Vec<f64>,
    pub weights: Vec<f64>,
    /// Smoothing bandwidth per component.
    pub bandwidths: Vec<f64>,
}

impl CollocationCurves {
    /// Smooth `data` with per-component collocation bandwidths.
    pub fn from_data(data: &ObservationSet, cfg: &TwoStepConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, p, k) = (data.len(), data.dim(), cfg.component);
        if k >= p {
            return Err(Error::Dimension(format!("component {k} out of range for p = {p}")));
        }
        let bandwidths: Vec<f64> = match cfg.h_e {
            Some(h) => vec![h; p],
            None => (0..p)
                .map(|j| {
                    rot_bandwidth_detailed(data, j, false, &cfg.bandwidth).map(|e| collocation_bandwidth(e.h, n))
                })
                .collect::<Result<_>>()?,
        };
        let (t0, t1) = data.span();
        let h_max = bandwidths.iter().cloned().fold(0.0, f64::max);
        let (a, b) = (t0 + h_max, t1 - h_max);
        if !(a < b) {
            return Err(Error::Config(format!(
                "collocation bandwidth {h_max} leaves no interior on [{t0}, {t1}]"
            )));
        }
        let m = cfg.m.unwrap_or_else(|| default_grid_size(n)).max(2);
        let grid = uniform_grid(a, b, m);
        let mut states = Vec::with_capacity(m);
        let mut derivative = Vec::with_capacity(m);
        let mut d = [0.0];
        for &t in &grid {
            let mut row = vec![0.0; p];
            for j in 0..p {
                let h = data.covering_bandwidth(t, bandwidths[j], 2);
                local_linear_into(data, h, &[j], t, &mut row[j..j + 1])?;
            }
            let h = data.covering_bandwidth(t, bandwidths[k], 3);
            local_quadratic_deriv_into(data, h, &[k], t, &mut d)?;
            states.push(row);
            derivative.push(d[0]);
        }
        let weights = grid.iter().map(|&t| weight_function(t, (t0, t1), cfg.delta_w)).collect();
        Ok(CollocationCurves {
            component: k,
            grid,
            states,
            derivative,
            weights,
            bandwidths,
        })
    }

    /// Exact curves supplied by the caller, evaluated on `m` equispaced points of `[a, b]`.
    pub fn from_functions(
        component: usize,
        grid_span: (f64, f64),
        m: usize,
        weight_span: (f64, f64),
        delta_w: f64,
        state: impl Fn(f64) -> Vec<f64>,
        derivative: impl Fn(f64) -> f64,
    ) -> Self {
        let grid = uniform_grid(grid_span.0, grid_span.1, m);
        CollocationCurves {
            component,
            states: grid.iter().map(|&t| state(t)).collect(),
            derivative: grid.iter().map(|&t| derivative(t)).collect(),
            weights: grid.iter().map(|&t| weight_function(t, weight_span, delta_w)).collect(),
            grid,
            bandwidths: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

struct Collocation<'a> {
    model: &'a OdeModel,
    curves: &'a CollocationCurves,
    scale: Vec<f64>,
}

impl LeastSquares for Collocation<'_> {
    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let c = self.curves;
        let mut scratch = vec![0.0; self.model.p()];
        Ok((0..c.len())
            .map(|j| {
                let f = self.model.component(c.component, c.grid[j], &c.states[j], theta, &mut scratch);
                self.scale[j] * (c.derivative[j] - f)
            })
            .collect())
    }
}

/// `(1/m) sum_j w_j (X'_k(t*_j) - f_k(t*_j, X(t*_j); theta))^2`.
pub fn collocation_objective(model: &OdeModel, curves: &CollocationCurves, theta: &[f64]) -> Result<f64> {
    let prob = Collocation::new(model, curves);
    Ok(prob.residuals(theta)?.iter().map(|r| r * r).sum())
}

impl<'a> Collocation<'a> {
    fn new(model: &'a OdeModel, curves: &'a CollocationCurves) -> Self {
        let m = curves.len() as f64;
        Collocation {
            model,
            curves,
            scale: curves.weights.iter().map(|w| (w / m).sqrt()).collect(),
        }
    }
}

fn check_model(model: &OdeModel, curves: &CollocationCurves, initial: Option<&[f64]>) -> Result<()> {
    if curves.component >= model.p() {
        return Err(Error::Dimension(format!("component {} out of range for p = {}", curves.component, model.p())));
    }
    if curves.states.first().is_some_and(|r| r.len() != model.p()) {
        return Err(Error::Dimension("curve dimension differs from the model".into()));
    }
    if initial.is_some_and(|v| v.len() != model.q()) {
        return Err(Error::Dimension(format!("initial theta must have length q = {}", model.q())));
    }
    Ok(())
}

/// Minimize the collocation objective for pre-computed curves.
pub fn two_step_from_curves(model: &OdeModel, curves: &CollocationCurves, cfg: &TwoStepConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    check_model(model, curves, cfg.initial.as_deref())?;
    let prob = Collocation::new(model, curves);
    run_multistart(
        &prob,
        model.bounds(),
        cfg.initial.as_deref(),
        cfg.multistart,
        cfg.seed,
        &cfg.lm,
        Method::TwoStep,
    )
}

/// Two-step estimate together with the curves it was computed from.
pub fn two_step_detailed(
    model: &OdeModel,
    data: &ObservationSet,
    cfg: &TwoStepConfig,
) -> Result<(EstimationResult, Arc<CollocationCurves>)> {
    if data.dim() != model.p() {
        return Err(Error::Dimension(format!("data has p = {}, model has p = {}", data.dim(), model.p())));
    }
    let curves = Arc::new(CollocationCurves::from_data(data, cfg)?);
    let est = two_step_from_curves(model, &curves, cfg)?;
    Ok((est, curves))
}

pub fn two_step_estimate(model: &OdeModel, data: &ObservationSet, cfg: &TwoStepConfig) -> Result<EstimationResult> {
    two_step_detailed(model, data, cfg).map(|(e, _)| e)
}
