use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Right-hand side `f(t, x; theta)`, writing the derivative into the last argument.
pub type RhsFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Closed-form solution `(elapsed, theta, x0) -> x(t0 + elapsed)`.
pub type SolutionFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Closed interval constraint on one parameter. Either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ParamBounds {
    pub const UNBOUNDED: ParamBounds = ParamBounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(lower <= upper, "empty parameter interval [{lower}, {upper}]");
        ParamBounds { lower, upper }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn is_finite(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Midpoint for finite intervals, otherwise the finite end (or zero).
    pub fn center(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower,
            (false, true) => self.upper,
            (false, false) => 0.0,
        }
    }
}

/// A parametric ODE system `X' = f(t, X; theta)` with `p` states and `q` parameters.
#[derive(Clone)]
pub struct OdeModel {
    name: String,
    p: usize,
    q: usize,
    rhs: Arc<RhsFn>,
    bounds: Vec<ParamBounds>,
    analytic: Option<Arc<SolutionFn>>,
}

impl OdeModel {
    pub fn new<F>(name: impl Into<String>, p: usize, q: usize, rhs: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(p > 0, "state dimension must be positive");
        OdeModel {
            name: name.into(),
            p,
            q,
            rhs: Arc::new(rhs),
            bounds: vec![ParamBounds::UNBOUNDED; q],
            analytic: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<ParamBounds>) -> Self {
        assert_eq!(bounds.len(), self.q, "one bound per parameter");
        self.bounds = bounds;
        self
    }

    pub fn with_analytic_solution<F>(mut self, sol: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.analytic = Some(Arc::new(sol));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Parameter dimension.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn bounds(&self) -> &[ParamBounds] {
        &self.bounds
    }

    pub fn theta_in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.q && theta.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v))
    }

    pub fn rhs_into(&self, t: f64, x: &[f64], theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.p);
        debug_assert_eq!(out.len(), self.p);
        (self.rhs)(t, x, theta, out)
    }

    pub fn rhs(&self, t: f64, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.rhs_into(t, x, theta, &mut out);
        out
    }

    /// Component `k` (zero-based) of the right-hand side. `scratch` must have length `p`.
    pub fn component(&self, k: usize, t: f64, x: &[f64], theta: &[f64], scratch: &mut [f64]) -> f64 {
        self.rhs_into(t, x, theta, scratch);
        scratch[k]
    }

    pub fn analytic_solution(&self) -> Option<&SolutionFn> {
        self.analytic.as_deref()
    }
}

impl fmt::Debug for OdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeModel")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("bounds", &self.bounds)
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}
