//! Integral-matching test for a single component.
//!
//! Pseudo-residuals compare each observation with the smoothed state at an
//! anchor plus the integral of the model's right-hand side along the smoothed
//! state. In the adjusted form the restricted span is split into `n_l`
//! sub-intervals, each anchored at its left end, and the per-interval
//! statistics are pooled as `IM* = sum IM^l / sqrt(n_used)`, then shrunk by
//! `mu_n = 1 + 3 n^(-1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::TwoStepConfig;
use crate::gof::common::{check_component, for_each_close_pair, resolve_theta, smoothed_state_into, state_bandwidths};
use crate::gof::pvalue::Reference;
use crate::gof::quadrature::simpson;
use crate::gof::report::{Bandwidths, Intermediates, TestId, TestReport};
use crate::ode::OdeModel;
use crate::smoothing::{BandwidthOptions, ObservationSet};

/// `0.025 n^(-3/5) ln^(1/2) n`.
pub fn default_im_bandwidth(n: usize) -> f64 {
    let n = n as f64;
    0.025 * n.powf(-0.6) * n.ln().sqrt()
}

/// `1 + 3 n^(-1/2)`.
pub fn mu_n(n: usize) -> f64 {
    1.0 + 3.0 / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImConfig {
    /// Test bandwidth; `None` means `0.025 n^(-3/5) ln^(1/2) n`.
    pub h: Option<f64>,
    /// Smoothing bandwidth for every state component; `None` uses each component's plug-in value.
    pub h0: Option<f64>,
    pub adjusted: bool,
    pub n_l: usize,
    /// Restricted span as fractions of `[t0, T]`.
    pub restricted: (f64, f64),
    /// Simpson panels per sub-interval.
    pub panels: usize,
    pub level: f64,
    pub two_step: TwoStepConfig,
    /// Skip estimation and use this parameter.
    pub theta: Option<Vec<f64>>,
    pub bandwidth: BandwidthOptions,
}

impl Default for ImConfig {
    fn default() -> Self {
        ImConfig {
            h: None,
            h0: None,
            adjusted: true,
            n_l: 8,
            restricted: (0.1, 0.9),
            panels: 64,
            level: 0.05,
            two_step: TwoStepConfig::default(),
            theta: None,
            bandwidth: BandwidthOptions::default(),
        }
    }
}

impl ImConfig {
    pub fn plain() -> Self {
        ImConfig {
            adjusted: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_l == 0 {
            return Err(Error::Config("n_l must be at least 1".into()));
        }
        let (a, b) = self.restricted;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::Config(format!("restricted span ({a}, {b}) must satisfy 0 <= a < b <= 1")));
        }
        if self.panels == 0 {
            return Err(Error::Config("quadrature panels must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Bandwidth(h));
            }
        }
        Ok(())
    }

    /// Integration intervals in time units.
    pub fn intervals(&self, span: (f64, f64)) -> Vec<(f64, f64)> {
        let len = span.1 - span.0;
        if !self.adjusted {
            return vec![span];
        }
        let a = span.0 + self.restricted.0 * len;
        let b = span.0 + self.restricted.1 * len;
        let w = (b - a) / self.n_l as f64;
        (0..self.n_l)
            .map(|l| (a + l as f64 * w, if l + 1 == self.n_l { b } else { a + (l + 1) as f64 * w }))
            .collect()
    }
}

/// Pseudo-residuals for observations inside `[a, b)` (`[a, b]` when `closed`), zero elsewhere:
/// `Y_ik - X_k(a) - int_a^{t_i} f_k(t, X(t); theta) dt`.
#[allow(clippy::too_many_arguments)]
pub fn im_pseudoresiduals(
    data: &ObservationSet,
    model: &OdeModel,
    theta: &[f64],
    k: usize,
    h0: &[f64],
    interval: (f64, f64),
    closed: bool,
    panels: usize,
) -> Result<Vec<f64>> {
    check_component(model, data, k)?;
    let (a, b) = interval;
    let p = data.dim();
    let mut x = vec![0.0; p];
    let mut scratch = vec![0.0; p];
    smoothed_state_into(data, h0, a, &mut x)?;
    let anchor = x[k];
    let mut e = vec![0.0; data.len()];
    for (i, &ti) in data.times().iter().enumerate() {
        let inside = ti >= a && (ti < b || (closed && ti <= b));
        if !inside {
            continue;
        }
        let n_panels = ((panels as f64 * (ti - a) / (b - a)).ceil() as usize).max(2);
        let integral = simpson(
            |t| {
                smoothed_state_into(data, h0, t, &mut x)?;
                Ok(model.component(k, t, &x, theta, &mut scratch))
            },
            a,
            ti,
            n_panels,
        )?;
        e[i] = data.value(i, k) - anchor - integral;
    }
    Ok(e)
}

/// `(sum_{i!=j} K e_i e_j, sqrt(sum_{i!=j} 2 K^2 e_i^2 e_j^2))`.
pub fn im_parts(e: &[f64], times: &[f64], h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Bandwidth(h));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for_each_close_pair(times, h, |i, j, k| {
        let prod = e[i] * e[j];
        num += 2.0 * k * prod;
        den += 4.0 * k * k * prod * prod;
    });
    Ok((num, den.sqrt()))
}

pub fn im_ratio(e: &[f64], times: &[f64], h: f64) -> Result<f64> {
    let (num, den) = im_parts(e, times, h)?;
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

pub fn im_test(data: &ObservationSet, model: &OdeModel, k: usize, cfg: &ImConfig) -> Result<TestReport> {
    cfg.validate()?;
    check_component(model, data, k)?;
    let n = data.len();
    let theta = resolve_theta(model, data, k, cfg.theta.as_deref(), &cfg.two_step)?;
    let h0 = state_bandwidths(data, cfg.h0, &cfg.bandwidth)?;
    let h = cfg.h.unwrap_or_else(|| default_im_bandwidth(n));
    let intervals = cfg.intervals(data.span());
    let last = intervals.len() - 1;

    let mut residuals = vec![0.0; n];
    let mut per_interval = Vec::with_capacity(intervals.len());
    for (l, &iv) in intervals.iter().enumerate() {
        let e = im_pseudoresiduals(data, model, &theta, k, &h0, iv, l == last, cfg.panels)?;
        for (r, v) in residuals.iter_mut().zip(&e) {
            if *v != 0.0 {
                *r = *v;
            }
        }
        per_interval.push(match im_ratio(&e, data.times(), h) {
            Ok(v) => Some(v),
            Err(Error::ZeroDenominator) => None,
            Err(e) => return Err(e),
        });
    }
    let used: Vec<f64> = per_interval.iter().flatten().cloned().collect();
    if used.is_empty() {
        return Err(Error::ZeroDenominator);
    }
    let n_used = used.len();
    let (statistic, mu) = if cfg.adjusted {
        let mu = mu_n(n);
        (used.iter().sum::<f64>() / (n_used as f64).sqrt() / mu, mu)
    } else {
        (used[0], 1.0)
    };
    Ok(TestReport::new(
        TestId::im(k),
        statistic,
        Reference::StandardNormal,
        cfg.level,
        n,
        theta,
        Bandwidths {
            h,
            h0: Some(h0),
            ..Default::default()
        },
        Intermediates::Im {
            adjusted: cfg.adjusted,
            per_interval,
            n_used,
            mu_n: mu,
            residuals,
        },
    ))
}
