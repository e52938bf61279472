//! Rule-of-thumb plug-in bandwidths for local polynomial smoothing.
//!
//! The regression function is approximated by quartic polynomials fitted by
//! least squares on `N` contiguous blocks of the time-sorted sample (`N` chosen
//! by Mallows' Cp, `N = 1` being a single global quartic). The residual variance
//! `sigma^2` and the roughness `sum_i m^{(r)}(t_i)^2` of the fitted polynomials
//! are plugged into the asymptotically optimal constant bandwidth
//!
//! ```text
//! h = C(K) [ sigma^2 (T - t0) / sum_i m^{(r)}(t_i)^2 ]^(1 / (2r + 1))
//! ```
//!
//! with `r = 2` for the local linear level estimate and `r = 3` for the local
//! quadratic derivative estimate. For Epanechnikov, `C = 15^(1/5) ~ 1.719`
//! and `C ~ 2.275` respectively.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothing::data::ObservationSet;
use crate::smoothing::kernel::Kernel;

pub const MIN_OBSERVATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthOptions {
    /// Lower clamp as a fraction of the span.
    pub min_fraction: f64,
    /// Upper clamp as a fraction of the span.
    pub max_fraction: f64,
    /// Largest number of quartic blocks; `None` means `clamp(n / 20, 1, 5)`.
    pub max_blocks: Option<usize>,
    pub kernel: Kernel,
}

impl Default for BandwidthOptions {
    fn default() -> Self {
        BandwidthOptions {
            min_fraction: 0.01,
            max_fraction: 0.25,
            max_blocks: None,
            kernel: Kernel::Epanechnikov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub h: f64,
    /// Value before clamping (may be infinite when the roughness estimate is zero).
    pub raw: f64,
    pub sigma2: f64,
    /// `sum_i m^{(r)}(t_i)^2`
    pub roughness: f64,
    pub blocks: usize,
    pub clamped: bool,
}

/// Kernel constant `C_{nu,p}(K)` for local linear (`nu = 0, p = 1`) or local quadratic derivative (`nu = 1, p = 2`).
pub fn kernel_constant(kernel: Kernel, for_derivative: bool) -> f64 {
    let mu2 = kernel.second_moment();
    if for_derivative {
        // equivalent kernel u K(u) / mu2
        let r = kernel.weighted_roughness() / (mu2 * mu2);
        let mu = kernel.fourth_moment() / mu2;
        (36.0 * 3.0 * r / (4.0 * mu * mu)).powf(1.0 / 7.0)
    } else {
        (4.0 * kernel.roughness() / (4.0 * mu2 * mu2)).powf(0.2)
    }
}

struct BlockFit {
    rss: f64,
    roughness: f64,
}

fn fit_blocks(t: &[f64], y: &[f64], blocks: usize, order: usize) -> Option<BlockFit> {
    let n = t.len();
    let mut rss = 0.0;
    let mut roughness = 0.0;
    for b in 0..blocks {
        let lo = b * n / blocks;
        let hi = (b + 1) * n / blocks;
        let (tb, yb) = (&t[lo..hi], &y[lo..hi]);
        let distinct = 1 + tb.windows(2).filter(|w| w[1] != w[0]).count();
        if distinct < 5 {
            return None;
        }
        let center = 0.5 * (tb[0] + tb[tb.len() - 1]);
        let scale = (0.5 * (tb[tb.len() - 1] - tb[0])).max(f64::MIN_POSITIVE);
        let m = tb.len();
        let design = DMatrix::from_fn(m, 5, |i, j| ((tb[i] - center) / scale).powi(j as i32));
        let rhs = DVector::from_column_slice(yb);
        let beta = design.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
        let resid = &rhs - &design * &beta;
        rss += resid.norm_squared();
        for &ti in tb {
            let z = (ti - center) / scale;
            let d = match order {
                2 => (2.0 * beta[2] + 6.0 * beta[3] * z + 12.0 * beta[4] * z * z) / scale.powi(2),
                _ => (6.0 * beta[3] + 24.0 * beta[4] * z) / scale.powi(3),
            };
            roughness += d * d;
        }
    }
    Some(BlockFit { rss, roughness })
}

/// Plug-in bandwidth for component `k` (zero-based) with full diagnostics.
pub fn rot_bandwidth_detailed(
    data: &ObservationSet,
    k: usize,
    for_derivative: bool,
    opts: &BandwidthOptions,
) -> Result<BandwidthEstimate> {
    let n = data.len();
    if n < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "bandwidth selection needs at least {MIN_OBSERVATIONS} observations, got {n}"
        )));
    }
    if k >= data.dim() {
        return Err(Error::Dimension(format!("component {k} out of range for p = {}", data.dim())));
    }
    let t = data.times();
    let y = data.component(k);
    let order = if for_derivative { 3 } else { 2 };
    let max_blocks = opts.max_blocks.unwrap_or((n / 20).clamp(1, 5)).max(1);

    let fits: Vec<(usize, BlockFit)> = (1..=max_blocks)
        .filter_map(|b| fit_blocks(t, &y, b, order).map(|f| (b, f)))
        .collect();
    if fits.is_empty() {
        return Err(Error::InsufficientData("too few distinct times for a quartic fit".into()));
    }
    let (largest, largest_fit) = fits.last().unwrap();
    let sigma2_max = largest_fit.rss / (n as f64 - 5.0 * *largest as f64);
    let (blocks, fit) = if sigma2_max > 0.0 {
        fits.iter()
            .min_by(|a, b| {
                let cp = |(nb, f): &(usize, BlockFit)| f.rss / sigma2_max - (n as f64 - 10.0 * *nb as f64);
                cp(a).total_cmp(&cp(b))
            })
            .unwrap()
    } else {
        &fits[0]
    };
    let sigma2 = fit.rss / (n as f64 - 5.0 * *blocks as f64);
    let span = data.span_length();
    let c = kernel_constant(opts.kernel, for_derivative);
    let exponent = 1.0 / (2.0 * order as f64 + 1.0);
    // roughness at rounding level relative to the data scale counts as zero
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let floor = n as f64 * (1e-9 * y_scale / span.powi(order as i32)).powi(2);
    let raw = if fit.roughness > floor {
        c * (sigma2 * span / fit.roughness).powf(exponent)
    } else {
        f64::INFINITY
    };
    let (lo, hi) = (opts.min_fraction * span, opts.max_fraction * span);
    let h = if raw.is_nan() { hi } else { raw.clamp(lo, hi) };
    Ok(BandwidthEstimate {
        h,
        raw,
        sigma2,
        roughness: fit.roughness,
        blocks: *blocks,
        clamped: h != raw,
    })
}

/// Plug-in bandwidth with default clamps `[0.01, 0.25] * (T - t0)`.
pub fn rot_bandwidth(data: &ObservationSet, k: usize, for_derivative: bool) -> Result<f64> {
    rot_bandwidth_detailed(data, k, for_derivative, &BandwidthOptions::default()).map(|e| e.h)
}
