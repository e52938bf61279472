//! Parametric ODE systems, their numerical solution, and the benchmark registry.

mod model;
pub mod registry;
mod solver;

pub use model::{OdeModel, ParamBounds, RhsFn, SolutionFn};
pub use registry::{ForcingCurve, ModelRegistry, RegistryEntry, Study1Variant};
pub use solver::{
    fd_step, jacobian_theta_fd, rk4_solve, solve_uniform, uniform_grid, Interpolation, ParamJacobian,
    SolverOptions, Trajectory, DEFAULT_SUBSTEPS,
};
