//! Parameter estimation by trajectory matching (nonlinear least squares) and
//! by two-step collocation against smoothed curves.

mod lm;
mod nls;
pub(crate) use nls::TimeGrid;
mod two_step;

pub use lm::{fd_jacobian, levenberg_marquardt, LeastSquares, LmConfig, LmOutcome};
pub use nls::{fitted_states, multistart_points, nls_estimate, EstimationResult, Method, NlsConfig};
pub use two_step::{
    collocation_bandwidth, collocation_objective, default_grid_size, two_step_detailed, two_step_estimate,
    two_step_from_curves, weight_function, CollocationCurves, TwoStepConfig,
};
