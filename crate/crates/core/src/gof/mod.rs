//! Goodness-of-fit tests: trajectory matching for the whole system, integral
//! matching and gradient matching for single components.

mod common;
mod gm;
mod im;
mod pvalue;
mod quadrature;
mod report;
mod tm;

pub use common::{smoothed_state_into, state_bandwidths};
pub use gm::{
    default_gm_bandwidth, gm_jackknife_variance, gm_quadruples, gm_shat, gm_statistic, gm_test, gm_variance, gm_vnf, rhs_at_observations,
    split_halves, GmConfig, GmSample,
};
pub use im::{default_im_bandwidth, im_parts, im_pseudoresiduals, im_ratio, im_test, mu_n, ImConfig};
pub use pvalue::{p_value, Reference};
pub use quadrature::{simpson, trapezoid};
pub use report::{Bandwidths, Intermediates, TestId, TestKind, TestReport};
pub use tm::{
    default_tm_bandwidth, residuals_tm, sigma_hat_tm, tm_quadratic_form, tm_test, tm_test_with_theta, vn_statistic,
    TmConfig, CONDITION_LIMIT,
};
