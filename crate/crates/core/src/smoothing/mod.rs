//! Nonparametric estimators: Epanechnikov kernel, kernel density and
//! Nadaraya-Watson numerators, local linear and local quadratic smoothers,
//! and plug-in bandwidth selection.

mod bandwidth;
mod curve;
mod data;
mod kde;
mod kernel;
mod local_poly;

pub use bandwidth::{
    kernel_constant, rot_bandwidth, rot_bandwidth_detailed, BandwidthEstimate, BandwidthOptions, MIN_OBSERVATIONS,
};
pub use curve::{EstimatorKind, SmoothedCurve};
pub use data::ObservationSet;
pub use kde::{kde_at, nw_parts_at};
pub use kernel::{epanechnikov, epanechnikov_deriv, Kernel};
pub use local_poly::{local_linear_at, local_linear_into, local_quadratic_deriv_at, local_quadratic_deriv_into};
