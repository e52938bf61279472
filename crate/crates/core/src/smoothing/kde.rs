//! Kernel density of the design points and Nadaraya-Watson numerators.
//!
//! With `u_i = (t - t_i) / h`:
//!
//! ```text
//! p(t)  = 1/n sum K(u_i) / h          h_k(t)  = 1/n sum K(u_i) Y_ik / h
//! p'(t) = 1/n sum K'(u_i) / h^2       h'_k(t) = 1/n sum K'(u_i) Y_ik / h^2
//! ```
//!
//! The numerators are returned un-normalized; the gradient test uses them
//! directly without forming the ratio `h_k / p`.

use crate::error::{Error, Result};
use crate::smoothing::data::ObservationSet;
use crate::smoothing::kernel::{epanechnikov, epanechnikov_deriv};

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Bandwidth(h))
    }
}

/// `(p(t), p'(t))`.
pub fn kde_at(data: &ObservationSet, h: f64, t: f64) -> Result<(f64, f64)> {
    check_bandwidth(h)?;
    let (lo, hi) = data.window(t, h);
    let (mut s, mut ds) = (0.0, 0.0);
    for &ti in &data.times()[lo..hi] {
        let u = (t - ti) / h;
        s += epanechnikov(u);
        ds += epanechnikov_deriv(u);
    }
    let n = data.len() as f64;
    Ok((s / (n * h), ds / (n * h * h)))
}

/// `(h_k(t), h'_k(t))` for zero-based component `k`.
pub fn nw_parts_at(data: &ObservationSet, h: f64, k: usize, t: f64) -> Result<(f64, f64)> {
    check_bandwidth(h)?;
    if k >= data.dim() {
        return Err(Error::Dimension(format!("component {k} out of range for p = {}", data.dim())));
    }
    let (lo, hi) = data.window(t, h);
    let (mut s, mut ds) = (0.0, 0.0);
    for i in lo..hi {
        let u = (t - data.times()[i]) / h;
        let y = data.value(i, k);
        s += epanechnikov(u) * y;
        ds += epanechnikov_deriv(u) * y;
    }
    let n = data.len() as f64;
    Ok((s / (n * h), ds / (n * h * h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_at_center() {
        let d = ObservationSet::univariate(vec![0.4], vec![2.0], None).unwrap();
        let (p, dp) = kde_at(&d, 0.1, 0.4).unwrap();
        assert!((p - 0.75 / 0.1).abs() < 1e-12);
        assert_eq!(dp, 0.0);
        assert_eq!(kde_at(&d, 0.1, 0.9).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let d = ObservationSet::univariate(vec![0.4], vec![2.0], None).unwrap();
        assert_eq!(kde_at(&d, 0.0, 0.4), Err(Error::Bandwidth(0.0)));
        assert!(nw_parts_at(&d, -1.0, 0, 0.4).is_err());
    }

    #[test]
    fn derivative_sign_convention() {
        // a point to the right of t pulls density up as t moves right
        let d = ObservationSet::univariate(vec![0.55], vec![1.0], None).unwrap();
        let (_, dp) = kde_at(&d, 0.1, 0.5).unwrap();
        let fd = (kde_at(&d, 0.1, 0.5 + 1e-7).unwrap().0 - kde_at(&d, 0.1, 0.5 - 1e-7).unwrap().0) / 2e-7;
        assert!(dp > 0.0);
        assert!((dp - fd).abs() < 1e-5 * dp.abs());
    }

    #[test]
    fn uniform_sample_density_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let d = ObservationSet::univariate(t, vec![0.0; 2000], Some((0.0, 1.0))).unwrap();
        let grid: Vec<f64> = (0..=60).map(|i| 0.2 + i as f64 * 0.01).collect();
        let mean = grid.iter().map(|&t| kde_at(&d, 0.05, t).unwrap().0).sum::<f64>() / grid.len() as f64;
        assert!((0.95..=1.05).contains(&mean), "mean = {mean}");
    }

    #[test]
    fn numerator_factorizes_for_constant_data() {
        let times = vec![0.1, 0.2, 0.25, 0.5, 0.7];
        let zero = ObservationSet::univariate(times.clone(), vec![0.0; 5], None).unwrap();
        let c = ObservationSet::univariate(times, vec![3.0; 5], None).unwrap();
        for t in [0.15, 0.3, 0.6] {
            assert_eq!(nw_parts_at(&zero, 0.2, 0, t).unwrap(), (0.0, 0.0));
            let (p, dp) = kde_at(&c, 0.2, t).unwrap();
            let (hk, dhk) = nw_parts_at(&c, 0.2, 0, t).unwrap();
            assert!((hk - 3.0 * p).abs() < 1e-12);
            assert!((dhk - 3.0 * dp).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_three_point_sum() {
        let d = ObservationSet::univariate(vec![0.3, 0.45, 0.8], vec![1.0, 2.0, 4.0], None).unwrap();
        let h = 0.25;
        // u = 0.8, 0.2, -1.2
        let hk = (0.75 * (1.0 - 0.64) * 1.0 + 0.75 * (1.0 - 0.04) * 2.0) / (3.0 * h);
        let dhk = (-1.5 * 0.8 * 1.0 + -1.5 * 0.2 * 2.0) / (3.0 * h * h);
        let (a, b) = nw_parts_at(&d, h, 0, 0.5).unwrap();
        assert!((a - hk).abs() < 1e-12);
        assert!((b - dhk).abs() < 1e-12);
    }
}
