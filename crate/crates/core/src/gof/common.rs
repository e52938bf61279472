use crate::error::{Error, Result};
use crate::estimation::{two_step_estimate, TwoStepConfig};
use crate::ode::OdeModel;
use crate::smoothing::{epanechnikov, local_linear_into, rot_bandwidth_detailed, BandwidthOptions, ObservationSet};

/// Visit every unordered pair `i < j` (in sorted-time order) with `|t_i - t_j| < h`,
/// passing `K((t_j - t_i) / h)`.
pub(crate) fn for_each_close_pair(times: &[f64], h: f64, mut visit: impl FnMut(usize, usize, f64)) {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            let d = times[j] - times[i];
            if d >= h {
                break;
            }
            visit(i, j, epanechnikov(d / h));
        }
    }
}

/// Local linear bandwidth per component: the override, or each component's plug-in value.
pub fn state_bandwidths(data: &ObservationSet, h0: Option<f64>, opts: &BandwidthOptions) -> Result<Vec<f64>> {
    match h0 {
        Some(h) if h > 0.0 && h.is_finite() => Ok(vec![h; data.dim()]),
        Some(h) => Err(Error::Bandwidth(h)),
        None => (0..data.dim())
            .map(|j| rot_bandwidth_detailed(data, j, false, opts).map(|e| e.h))
            .collect(),
    }
}

/// Local linear `X(t)` with one bandwidth per component, widened where the
/// window holds fewer than two distinct times.
pub fn smoothed_state_into(data: &ObservationSet, h0: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    for j in 0..data.dim() {
        let h = data.covering_bandwidth(t, h0[j], 2);
        local_linear_into(data, h, &[j], t, &mut out[j..j + 1])?;
    }
    Ok(())
}

pub(crate) fn check_component(model: &OdeModel, data: &ObservationSet, k: usize) -> Result<()> {
    if data.dim() != model.p() {
        return Err(Error::Dimension(format!("data has p = {}, model has p = {}", data.dim(), model.p())));
    }
    if k >= model.p() {
        return Err(Error::Dimension(format!("component {k} out of range for p = {}", model.p())));
    }
    Ok(())
}

/// The supplied parameter, or the two-step estimate for component `k`.
pub(crate) fn resolve_theta(
    model: &OdeModel,
    data: &ObservationSet,
    k: usize,
    theta: Option<&[f64]>,
    two_step: &TwoStepConfig,
) -> Result<Vec<f64>> {
    match theta {
        Some(t) if t.len() == model.q() => Ok(t.to_vec()),
        Some(t) => Err(Error::Dimension(format!("theta has length {}, model has q = {}", t.len(), model.q()))),
        None => {
            let cfg = TwoStepConfig {
                component: k,
                ..two_step.clone()
            };
            two_step_estimate(model, data, &cfg).map(|e| e.theta_hat)
        }
    }
}
