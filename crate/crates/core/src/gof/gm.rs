//! Gradient-matching test for a single component.
//!
//! Each half of a random split gives
//!
//! ```text
//! V^f = 1/(n h^2) sum_d { 1/(n-1)^2 sum_i sum_j [ K'_di K_dj (Y_i - Y_j) / h^3 - K_di K_dj f_d / h^2 ] }^2
//! ```
//!
//! with `K_di = K((t_d - t_i)/h)` and `f_d = f_k(t_d, X(t_d); theta)`. The double
//! sum factorizes as `(A_1 B_0 - A_0 B_1) / h^3 - B_0^2 f_d / h^2` where
//! `A_r = sum_i K'_di Y_i^r` and `B_r = sum_j K_dj Y_j^r`. The statistic is
//! `GM = sqrt(n~) (V_1 - V_2 + c S) / sqrt(2 Sigma)`, where `Sigma` is the
//! jackknife variance of `sqrt(n~) V^f` averaged over the two halves.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::TwoStepConfig;
use crate::gof::common::{check_component, resolve_theta, smoothed_state_into, state_bandwidths};
use crate::gof::pvalue::Reference;
use crate::gof::quadrature::simpson;
use crate::gof::report::{Bandwidths, Intermediates, TestId, TestReport};
use crate::ode::OdeModel;
use crate::smoothing::{
    epanechnikov, epanechnikov_deriv, local_quadratic_deriv_into, rot_bandwidth_detailed, BandwidthOptions,
    ObservationSet,
};

/// `n^(-1/29)`.
pub fn default_gm_bandwidth(n: usize) -> f64 {
    (n as f64).powf(-1.0 / 29.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmConfig {
    /// Gain on the bias term.
    pub c: f64,
    /// Test bandwidth; `None` means `n^(-1/29)`.
    pub h: Option<f64>,
    /// Local linear bandwidth for every state component; `None` uses plug-in values.
    pub h0: Option<f64>,
    /// Local quadratic derivative bandwidth; `None` uses the plug-in value.
    pub h1: Option<f64>,
    pub split_seed: u64,
    /// Simpson panels for the bias integral.
    pub panels: usize,
    pub level: f64,
    pub two_step: TwoStepConfig,
    pub theta: Option<Vec<f64>>,
    pub bandwidth: BandwidthOptions,
}

impl Default for GmConfig {
    fn default() -> Self {
        GmConfig {
            c: 1.0,
            h: None,
            h0: None,
            h1: None,
            split_seed: 0,
            panels: 512,
            level: 0.05,
            two_step: TwoStepConfig::default(),
            theta: None,
            bandwidth: BandwidthOptions::default(),
        }
    }
}

impl GmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        for h in [self.h, self.h0, self.h1].into_iter().flatten() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Bandwidth(h));
            }
        }
        if self.panels == 0 {
            return Err(Error::Config("quadrature panels must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

/// One half of the sample: times, the tested component, and `f_k(t_d, X(t_d); theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmSample {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

impl GmSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn check(&self, h: f64) -> Result<()> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Bandwidth(h));
        }
        if self.y.len() != self.len() || self.f.len() != self.len() {
            return Err(Error::Dimension("sample vectors differ in length".into()));
        }
        Ok(())
    }
}

pub fn gm_vnf(s: &GmSample, h: f64) -> Result<f64> {
    s.check(h)?;
    let n = s.len();
    if n < 2 {
        return Err(Error::InsufficientData("V^f needs at least two observations".into()));
    }
    let (h2, h3) = (h * h, h * h * h);
    let nm1sq = ((n - 1) * (n - 1)) as f64;
    let mut total = 0.0;
    for d in 0..n {
        let (mut a0, mut a1, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let u = (s.times[d] - s.times[i]) / h;
            if u.abs() >= 1.0 {
                continue;
            }
            let (k, kd) = (epanechnikov(u), epanechnikov_deriv(u));
            a0 += kd;
            a1 += kd * s.y[i];
            b0 += k;
            b1 += k * s.y[i];
        }
        let inner = ((a1 * b0 - a0 * b1) / h3 - b0 * b0 * s.f[d] / h2) / nm1sq;
        total += inner * inner;
    }
    Ok(total / (n as f64 * h2))
}

/// Jackknife estimate of the asymptotic variance of `sqrt(n) V^f`:
/// `n (n-1)/n sum_i (V_(-i) - mean)^2`, each leave-one-out value
/// obtained by downdating the factorized window sums.
pub fn gm_jackknife_variance(s: &GmSample, h: f64) -> Result<f64> {
    s.check(h)?;
    let n = s.len();
    if n < 3 {
        return Err(Error::InsufficientData("jackknife needs at least three observations".into()));
    }
    let (h2, h3) = (h * h, h * h * h);
    let mut sums = vec![[0.0f64; 4]; n];
    for d in 0..n {
        for i in 0..n {
            let u = (s.times[d] - s.times[i]) / h;
            if u.abs() >= 1.0 {
                continue;
            }
            let (k, kd) = (epanechnikov(u), epanechnikov_deriv(u));
            let acc = &mut sums[d];
            acc[0] += kd;
            acc[1] += kd * s.y[i];
            acc[2] += k;
            acc[3] += k * s.y[i];
        }
    }
    let inner = |[a0, a1, b0, b1]: [f64; 4], f: f64| (a1 * b0 - a0 * b1) / h3 - b0 * b0 * f / h2;
    let m = n - 1;
    let scale = 1.0 / ((m - 1) * (m - 1)) as f64;
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            let mut total = 0.0;
            for d in (0..n).filter(|&d| d != i) {
                let mut acc = sums[d];
                let u = (s.times[d] - s.times[i]) / h;
                if u.abs() < 1.0 {
                    let (k, kd) = (epanechnikov(u), epanechnikov_deriv(u));
                    acc[0] -= kd;
                    acc[1] -= kd * s.y[i];
                    acc[2] -= k;
                    acc[3] -= k * s.y[i];
                }
                let g = inner(acc, s.f[d]) * scale;
                total += g * g;
            }
            total / (m as f64 * h2)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    Ok(n as f64 * var)
}

/// The 120 orderings of five slots.
fn permutations5() -> Vec<[usize; 5]> {
    let mut out = Vec::with_capacity(120);
    let mut p = [0usize; 5];
    fn rec(depth: usize, used: &mut [bool; 5], p: &mut [usize; 5], out: &mut Vec<[usize; 5]>) {
        if depth == 5 {
            out.push(*p);
            return;
        }
        for v in 0..5 {
            if !used[v] {
                used[v] = true;
                p[depth] = v;
                rec(depth + 1, used, p, out);
                used[v] = false;
            }
        }
    }
    rec(0, &mut [false; 5], &mut p, &mut out);
    out
}

/// Quadruples of indices other than `s`: consecutive blocks of four in sorted-time order.
pub fn gm_quadruples(order: &[usize], s: usize) -> Vec<[usize; 4]> {
    let others: Vec<usize> = order.iter().cloned().filter(|&i| i != s).collect();
    let q = (order.len() - 1) / 4;
    (0..q)
        .map(|b| [others[4 * b], others[4 * b + 1], others[4 * b + 2], others[4 * b + 3]])
        .collect()
}

fn time_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    order
}

/// Projection-based variance estimate `Sigma^f` on one half.
pub fn gm_variance(s: &GmSample, h: f64) -> Result<f64> {
    s.check(h)?;
    let n = s.len();
    if n < 9 {
        return Err(Error::InsufficientData(format!(
            "variance estimate needs at least 9 observations in the half, got {n}"
        )));
    }
    let (h2, h3) = (h * h, h * h * h);
    let mut kmat = vec![0.0; n * n];
    let mut dmat = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let u = (s.times[a] - s.times[b]) / h;
            kmat[a * n + b] = epanechnikov(u);
            dmat[a * n + b] = epanechnikov_deriv(u);
        }
    }
    let w_prime = |z: [usize; 5]| -> f64 {
        let [a, b, c, d, t] = z;
        let ksa = kmat[t * n + a];
        let ksb = kmat[t * n + b];
        if ksa == 0.0 || ksb == 0.0 {
            return 0.0;
        }
        let left = dmat[t * n + c] * (s.y[c] - s.y[a]) / h3 - kmat[t * n + c] * s.f[t] / h2;
        let right = dmat[t * n + d] * (s.y[d] - s.y[b]) / h3 - kmat[t * n + d] * s.f[t] / h2;
        ksa * ksb * left * right / h2
    };
    let perms = permutations5();
    let order = time_order(&s.times);
    let w_hat: Vec<f64> = (0..n)
        .map(|t| {
            let quads = gm_quadruples(&order, t);
            let sum: f64 = quads
                .iter()
                .map(|q| {
                    let z = [q[0], q[1], q[2], q[3], t];
                    perms
                        .iter()
                        .map(|p| w_prime([z[p[0]], z[p[1]], z[p[2]], z[p[3]], z[p[4]]]))
                        .sum::<f64>()
                        / 120.0
                })
                .sum();
            sum / quads.len() as f64
        })
        .collect();
    let mean = w_hat.iter().sum::<f64>() / n as f64;
    Ok(w_hat.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
}

/// `sqrt(n~) (v1 - v2 + c S) / sqrt(2 Sigma)`.
pub fn gm_statistic(v1: f64, v2: f64, s_hat: f64, sigma: f64, n_tilde: usize, c: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((n_tilde as f64).sqrt() * (v1 - v2 + c * s_hat) / (2.0 * sigma).sqrt())
}

/// Random disjoint halves of size `floor(n / 2)`, each sorted.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let m = n / 2;
    let mut a = idx[..m].to_vec();
    let mut b = idx[m..2 * m].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// `1/h^2 int (f_k(t, X(t); theta) - X'_k(t))^2 dt` over the observation span.
#[allow(clippy::too_many_arguments)]
pub fn gm_shat(
    data: &ObservationSet,
    model: &OdeModel,
    theta: &[f64],
    k: usize,
    h: f64,
    h0: &[f64],
    h1: f64,
    panels: usize,
) -> Result<f64> {
    check_component(model, data, k)?;
    if h0.len() != data.dim() {
        return Err(Error::Dimension(format!("{} state bandwidths for p = {}", h0.len(), data.dim())));
    }
    let (a, b) = data.span();
    let p = data.dim();
    let mut x = vec![0.0; p];
    let mut scratch = vec![0.0; p];
    let mut d = [0.0];
    let integral = simpson(
        |t| {
            smoothed_state_into(data, h0, t, &mut x)?;
            local_quadratic_deriv_into(data, data.covering_bandwidth(t, h1, 3), &[k], t, &mut d)?;
            let r = model.component(k, t, &x, theta, &mut scratch) - d[0];
            Ok(r * r)
        },
        a,
        b,
        panels,
    )?;
    Ok(integral / (h * h))
}

/// `f_k(t_i, X(t_i); theta)` at every observation time.
pub fn rhs_at_observations(
    data: &ObservationSet,
    model: &OdeModel,
    theta: &[f64],
    k: usize,
    h0: &[f64],
) -> Result<Vec<f64>> {
    let p = data.dim();
    let mut x = vec![0.0; p];
    let mut scratch = vec![0.0; p];
    data.times()
        .iter()
        .map(|&t| {
            smoothed_state_into(data, h0, t, &mut x)?;
            Ok(model.component(k, t, &x, theta, &mut scratch))
        })
        .collect()
}

fn half_sample(data: &ObservationSet, k: usize, f: &[f64], idx: &[usize]) -> GmSample {
    GmSample {
        times: idx.iter().map(|&i| data.times()[i]).collect(),
        y: idx.iter().map(|&i| data.value(i, k)).collect(),
        f: idx.iter().map(|&i| f[i]).collect(),
    }
}

pub fn gm_test(data: &ObservationSet, model: &OdeModel, k: usize, cfg: &GmConfig) -> Result<TestReport> {
    cfg.validate()?;
    check_component(model, data, k)?;
    let n = data.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!("GM test needs at least 20 observations, got {n}")));
    }
    let theta = resolve_theta(model, data, k, cfg.theta.as_deref(), &cfg.two_step)?;
    let h0 = state_bandwidths(data, cfg.h0, &cfg.bandwidth)?;
    let h1 = match cfg.h1 {
        Some(h) => h,
        None => rot_bandwidth_detailed(data, k, true, &cfg.bandwidth)?.h,
    };
    let h = cfg.h.unwrap_or_else(|| default_gm_bandwidth(n));

    let f = rhs_at_observations(data, model, &theta, k, &h0)?;
    let (first, second) = split_halves(n, cfg.split_seed);
    let s1 = half_sample(data, k, &f, &first);
    let s2 = half_sample(data, k, &f, &second);
    let v1 = gm_vnf(&s1, h)?;
    let v2 = gm_vnf(&s2, h)?;
    let sigma = 0.5 * (gm_jackknife_variance(&s1, h)? + gm_jackknife_variance(&s2, h)?);
    let sigma_projection = gm_variance(&s1, h)?;
    let s_hat = gm_shat(data, model, &theta, k, h, &h0, h1, cfg.panels)?;
    let n_tilde = first.len();
    let statistic = gm_statistic(v1, v2, s_hat, sigma, n_tilde, cfg.c)?;
    Ok(TestReport::new(
        TestId::gm(k),
        statistic,
        Reference::StandardNormal,
        cfg.level,
        n,
        theta,
        Bandwidths {
            h,
            h0: Some(h0),
            h1: Some(h1),
            h_e: None,
        },
        Intermediates::Gm {
            v1,
            v2,
            s_hat,
            sigma_hat: sigma,
            sigma_projection,
            c: cfg.c,
            n_tilde,
            split_seed: cfg.split_seed,
            first_half: first,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        let p = permutations5();
        assert_eq!(p.len(), 120);
        let mut q = p.clone();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 120);
    }

    #[test]
    fn flat_data_and_zero_rhs() {
        let s = GmSample {
            times: (0..12).map(|i| i as f64 / 11.0).collect(),
            y: vec![2.0; 12],
            f: vec![0.0; 12],
        };
        assert_eq!(gm_vnf(&s, 0.8).unwrap(), 0.0);
        assert_eq!(gm_variance(&s, 0.8).unwrap(), 0.0);
        assert_eq!(gm_statistic(0.0, 0.0, 0.0, 0.0, 6, 1.0), Err(Error::ZeroVariance));
    }

    #[test]
    fn swap_identity() {
        let (v1, v2, s, sig, nt, c) = (0.7, 0.2, 0.05, 0.3, 150, 0.2);
        let gm = gm_statistic(v1, v2, s, sig, nt, c).unwrap();
        let swapped = gm_statistic(v2, v1, s, sig, nt, c).unwrap();
        let expect = -gm + 2.0 * (nt as f64).sqrt() * c * s / (2.0 * sig).sqrt();
        assert!((swapped - expect).abs() < 1e-12);
    }

    #[test]
    fn halves_are_disjoint_and_seeded() {
        let (a, b) = split_halves(11, 4);
        assert_eq!(a.len(), 5);
        assert_eq!(b.len(), 5);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(split_halves(11, 4), (a.clone(), b));
        assert_ne!(split_halves(11, 5).0, a);
    }

    #[test]
    fn jackknife_matches_recomputation() {
        let n = 17;
        let s = GmSample {
            times: (0..n).map(|i| (i as f64 + 0.3 * (i as f64).sin()) / n as f64).collect(),
            y: (0..n).map(|i| (i as f64 * 0.7).cos()).collect(),
            f: (0..n).map(|i| 0.2 * i as f64 - 1.0).collect(),
        };
        let h = 0.4;
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let keep = |v: &Vec<f64>| v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x).collect();
                gm_vnf(&GmSample { times: keep(&s.times), y: keep(&s.y), f: keep(&s.f) }, h).unwrap()
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / n as f64;
        let expect = n as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
        let got = gm_jackknife_variance(&s, h).unwrap();
        assert!((got - expect).abs() <= 1e-10 * expect.abs(), "{got} vs {expect}");
    }

    #[test]
    fn quadruples_skip_s() {
        let order: Vec<usize> = (0..10).collect();
        let q = gm_quadruples(&order, 2);
        assert_eq!(q, vec![[0, 1, 3, 4], [5, 6, 7, 8]]);
    }

    #[test]
    fn constant_bias_integrand() {
        // f = 0 and the data lie on a line of slope m, so X'_k = m everywhere
        let model = OdeModel::new("zero", 1, 1, |_, _, _, out: &mut [f64]| out[0] = 0.0);
        let n = 60;
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y = t.iter().map(|s| 3.0 * s).collect();
        let d = ObservationSet::univariate(t, y, None).unwrap();
        let (h, h0, h1) = (0.5, 0.1, 0.15);
        let s = gm_shat(&d, &model, &[0.0], 0, h, &[h0], h1, 512).unwrap();
        let expect = 9.0 / (h * h);
        assert!((s - expect).abs() < 1e-9 * expect, "{s} vs {expect}");
    }
}
