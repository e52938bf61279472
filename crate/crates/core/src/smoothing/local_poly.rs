//! Kernel-weighted local polynomial fits.
//!
//! Both estimators use the scaled offsets `u_i = (t_i - t) / h` and the moment
//! sums `S_r = sum K(u_i) u_i^r`, `T_r = sum K(u_i) u_i^r Y_i` over the open
//! window `|t_i - t| < h`. Local linear gives
//! `X(t) = (S_2 T_0 - S_1 T_1) / (S_0 S_2 - S_1^2)`; the local quadratic
//! derivative is the linear coefficient of the weighted quadratic fit divided by `h`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::smoothing::data::ObservationSet;
use crate::smoothing::kde::check_bandwidth;
use crate::smoothing::kernel::epanechnikov;

fn check_components(data: &ObservationSet, components: &[usize]) -> Result<()> {
    if let Some(&k) = components.iter().find(|&&k| k >= data.dim()) {
        return Err(Error::Dimension(format!("component {k} out of range for p = {}", data.dim())));
    }
    Ok(())
}

/// Local linear estimate of each requested component at `t`, written into `out`.
pub fn local_linear_into(
    data: &ObservationSet,
    h: f64,
    components: &[usize],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    check_bandwidth(h)?;
    debug_assert_eq!(components.len(), out.len());
    let (lo, hi) = data.window(t, h);
    let distinct = data.distinct_times(lo, hi);
    if distinct < 2 {
        return Err(Error::DegenerateWindow { t, distinct, needed: 2 });
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &ti in &data.times()[lo..hi] {
        let u = (ti - t) / h;
        let w = epanechnikov(u);
        s0 += w;
        s1 += w * u;
        s2 += w * u * u;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 1e-14 * s0 * s0) {
        return Err(Error::DegenerateWindow { t, distinct, needed: 2 });
    }
    for (slot, &k) in out.iter_mut().zip(components) {
        let (mut t0, mut t1) = (0.0, 0.0);
        for i in lo..hi {
            let u = (data.times()[i] - t) / h;
            let w = epanechnikov(u) * data.value(i, k);
            t0 += w;
            t1 += w * u;
        }
        *slot = (s2 * t0 - s1 * t1) / det;
    }
    Ok(())
}

pub fn local_linear_at(data: &ObservationSet, h: f64, components: &[usize], t: f64) -> Result<Vec<f64>> {
    check_components(data, components)?;
    let mut out = vec![0.0; components.len()];
    local_linear_into(data, h, components, t, &mut out)?;
    Ok(out)
}

/// Local quadratic estimate of the first derivative of each requested component.
pub fn local_quadratic_deriv_into(
    data: &ObservationSet,
    h: f64,
    components: &[usize],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    check_bandwidth(h)?;
    let (lo, hi) = data.window(t, h);
    let distinct = data.distinct_times(lo, hi);
    if distinct < 3 {
        return Err(Error::DegenerateWindow { t, distinct, needed: 3 });
    }
    let mut s = [0.0f64; 5];
    for &ti in &data.times()[lo..hi] {
        let u = (ti - t) / h;
        let w = epanechnikov(u);
        let mut pw = w;
        for sr in s.iter_mut() {
            *sr += pw;
            pw *= u;
        }
    }
    let gram = Matrix3::new(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
    let lu = gram.lu();
    let det = lu.determinant();
    if !(det.abs() > 1e-14 * s[0].powi(3)) {
        return Err(Error::DegenerateWindow { t, distinct, needed: 3 });
    }
    for (slot, &k) in out.iter_mut().zip(components) {
        let mut rhs = Vector3::zeros();
        for i in lo..hi {
            let u = (data.times()[i] - t) / h;
            let w = epanechnikov(u) * data.value(i, k);
            rhs[0] += w;
            rhs[1] += w * u;
            rhs[2] += w * u * u;
        }
        let beta = lu
            .solve(&rhs)
            .ok_or(Error::DegenerateWindow { t, distinct, needed: 3 })?;
        *slot = beta[1] / h;
    }
    Ok(())
}

pub fn local_quadratic_deriv_at(
    data: &ObservationSet,
    h: f64,
    components: &[usize],
    t: f64,
) -> Result<Vec<f64>> {
    check_components(data, components)?;
    let mut out = vec![0.0; components.len()];
    local_quadratic_deriv_into(data, h, components, t, &mut out)?;
    Ok(out)
}
