//! Benchmark systems: the linear family with its three disturbance forms,
//! FitzHugh-Nagumo, Lotka-Volterra, and the CD8+ T-cell compartment model.
//!
//! Every system is written on normalized time `t in [0, 1]` with the right-hand
//! side multiplied by the timescale `tau`. The `alpha`/`beta` switches add the
//! disturbance terms to the first/second equation; `alpha = beta = 0` is the
//! null model used for estimation and testing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::model::{OdeModel, ParamBounds};

pub const STUDY1_THETA: [f64; 2] = [-0.06, -0.24];
pub const STUDY1_X0: [f64; 2] = [5.0, 5.0];
pub const FHN_THETA: [f64; 3] = [3.0, 0.2, 0.34];
pub const FHN_X0: [f64; 2] = [1.0, -1.0];
pub const LV_THETA: [f64; 4] = [1.0, -1.5, -1.5, 2.0];
pub const LV_X0: [f64; 2] = [1.0, 2.0];
pub const DEFAULT_TAU: f64 = 10.0;

/// Fixed T-cell constants `(delta_m, delta_s, gamma_ml)`.
pub const TCELL_FIXED: [f64; 3] = [0.0, 0.0, 0.0];
/// Dendritic-cell delay in days.
pub const TCELL_DELAY_DAYS: f64 = 3.08;
/// Synthetic-fixture parameters `(rho_m, rho_s, delta_l, gamma_ms, gamma_sl)`.
pub const TCELL_THETA: [f64; 5] = [0.9, 0.8, 0.3, 0.2, 0.35];
pub const TCELL_X0: [f64; 3] = [8.0, 9.0, 7.0];

pub const KEYS: [&str; 4] = ["study1", "fhn", "lotka-volterra", "tcell"];

/// Disturbance family of the linear study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study1Variant {
    /// `0.4 alpha cos(.)` / `0.4 beta cos(.)`
    H11,
    /// `0.1 alpha (.)^3` / `0.1 beta (.)^3`
    H12,
    /// `2 alpha exp(.)` / `5 beta exp(.)`
    H13,
}

impl Study1Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Study1Variant::H11 => "H11",
            Study1Variant::H12 => "H12",
            Study1Variant::H13 => "H13",
        }
    }
}

impl std::str::FromStr for Study1Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h11" | "11" => Ok(Study1Variant::H11),
            "h12" | "12" => Ok(Study1Variant::H12),
            "h13" | "13" => Ok(Study1Variant::H13),
            other => Err(Error::Config(format!("unknown study-1 variant `{other}`"))),
        }
    }
}

/// Linear system `X1' = tau(a X1 + ...)`, `X2' = tau(a X1 + b X2 + ...)`, theta = (a, b).
pub fn study1_model(variant: Study1Variant, alpha: f64, beta: f64, tau: f64) -> OdeModel {
    let name = if alpha == 0.0 && beta == 0.0 {
        "study1".to_string()
    } else {
        format!("study1-{}(alpha={alpha},beta={beta})", variant.label())
    };
    let model = OdeModel::new(name, 2, 2, move |_t, x, th, out| {
        let (a, b) = (th[0], th[1]);
        let u1 = a * x[0];
        let u2 = a * x[0] + b * x[1];
        let (d1, d2) = match variant {
            Study1Variant::H11 => (0.4 * alpha * u1.cos(), 0.4 * beta * u2.cos()),
            Study1Variant::H12 => (0.1 * alpha * u1.powi(3), 0.1 * beta * u2.powi(3)),
            Study1Variant::H13 => (2.0 * alpha * u1.exp(), 5.0 * beta * u2.exp()),
        };
        // skip zero-weighted terms so the null model never touches exp/cos
        out[0] = tau * (u1 + if alpha != 0.0 { d1 } else { 0.0 });
        out[1] = tau * (u2 + if beta != 0.0 { d2 } else { 0.0 });
    })
    .with_bounds(vec![ParamBounds::new(-1.0, 1.0), ParamBounds::new(-1.0, 1.0)]);
    if alpha == 0.0 && beta == 0.0 {
        model.with_analytic_solution(move |dt, th, x0| linear_solution(dt, th, x0, tau))
    } else {
        model
    }
}

fn linear_solution(dt: f64, th: &[f64], x0: &[f64], tau: f64) -> Vec<f64> {
    let (a, b) = (th[0], th[1]);
    let ea = (tau * a * dt).exp();
    let eb = (tau * b * dt).exp();
    let x1 = x0[0] * ea;
    let x2 = if (a - b).abs() > 1e-12 {
        x0[1] * eb + a * x0[0] * (ea - eb) / (a - b)
    } else {
        x0[1] * eb + tau * a * x0[0] * dt * ea
    };
    vec![x1, x2]
}

/// FitzHugh-Nagumo, theta = (a, b, c).
pub fn fhn_model(alpha: f64, beta: f64, tau: f64) -> OdeModel {
    let name = if alpha == 0.0 && beta == 0.0 {
        "fhn".to_string()
    } else {
        format!("fhn(alpha={alpha},beta={beta})")
    };
    OdeModel::new(name, 2, 3, move |_t, x, th, out| {
        let (a, b, c) = (th[0], th[1], th[2]);
        let (v, r) = (x[0], x[1]);
        out[0] = tau * (a * (v + r - v * v * v / 3.0) + alpha * v * r);
        out[1] = tau * (-(v + b * r - c) / a + 0.4 * beta * v * r);
    })
    .with_bounds(vec![
        ParamBounds::new(0.5, 6.0),
        ParamBounds::new(0.0, 1.0),
        ParamBounds::new(0.0, 1.0),
    ])
}

/// Lotka-Volterra, theta = (a, b, c, d).
pub fn lotka_volterra_model(alpha: f64, beta: f64, tau: f64) -> OdeModel {
    let name = if alpha == 0.0 && beta == 0.0 {
        "lotka-volterra".to_string()
    } else {
        format!("lotka-volterra(alpha={alpha},beta={beta})")
    };
    OdeModel::new(name, 2, 4, move |_t, x, th, out| {
        let (a, b, c, d) = (th[0], th[1], th[2], th[3]);
        out[0] = tau * (a * x[0] + b * x[0] * x[1] + 0.8 * alpha * x[1]);
        out[1] = tau * (c * x[1] + d * x[0] * x[1] + 4.0 * beta * x[0]);
    })
    .with_bounds(vec![
        ParamBounds::new(0.0, 3.0),
        ParamBounds::new(-3.0, 0.0),
        ParamBounds::new(-3.0, 0.0),
        ParamBounds::new(0.0, 4.0),
    ])
}

/// Externally supplied scalar forcing, linearly interpolated and clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ForcingCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("forcing curve needs at least one point".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Config("forcing curve contains non-finite values".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, values) = points.into_iter().unzip();
        Ok(ForcingCurve { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        if tb == ta {
            return self.values[i + 1];
        }
        let w = (t - ta) / (tb - ta);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Smooth synthetic dendritic-cell profile used when no forcing file is given.
    pub fn synthetic_default() -> Self {
        let points = (0..=56)
            .map(|i| {
                let t = -0.4 + i as f64 * 0.025;
                let v = 0.2 + (-((t + 0.05) / 0.25).powi(2)).exp();
                (t, v)
            })
            .collect();
        ForcingCurve::new(points).expect("static forcing curve")
    }
}

/// CD8+ T-cell model on log counts, theta = (rho_m, rho_s, delta_l, gamma_ms, gamma_sl).
///
/// `D^m` and `D^s` are both taken from `forcing`, delayed by `delay` (normalized time).
pub fn tcell_model(forcing: ForcingCurve, delay: f64, tau: f64) -> OdeModel {
    let forcing = Arc::new(forcing);
    let [delta_m, delta_s, gamma_ml] = TCELL_FIXED;
    OdeModel::new("tcell", 3, 5, move |t, x, th, out| {
        let (rho_m, rho_s, delta_l, gamma_ms, gamma_sl) = (th[0], th[1], th[2], th[3], th[4]);
        let d = forcing.at(t - delay);
        out[0] = tau * (rho_m * d - delta_m - gamma_ms - gamma_ml);
        out[1] = tau * (rho_s * d - delta_s - gamma_sl + gamma_ms * (x[0] - x[1]).exp());
        out[2] = tau * (gamma_ml * (x[0] - x[2]).exp() + gamma_sl * (x[1] - x[2]).exp() - delta_l);
    })
    .with_bounds(vec![ParamBounds::new(0.0, 5.0); 5])
}

/// Delay in normalized time when one time unit spans `tau` days.
pub fn tcell_delay(tau: f64) -> f64 {
    TCELL_DELAY_DAYS / tau
}

/// A registered null model together with its reference parameters.
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub key: &'static str,
    pub description: &'static str,
    pub model: OdeModel,
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub tau: f64,
    pub span: (f64, f64),
}

pub struct ModelRegistry;

impl ModelRegistry {
    pub fn keys() -> &'static [&'static str] {
        &KEYS
    }

    pub fn lookup(key: &str) -> Result<RegistryEntry> {
        Self::lookup_with(key, DEFAULT_TAU, None)
    }

    /// Look up `key` with timescale `tau`; `forcing` only applies to `tcell`.
    pub fn lookup_with(key: &str, tau: f64, forcing: Option<ForcingCurve>) -> Result<RegistryEntry> {
        let entry = match key {
            "study1" | "linear" => RegistryEntry {
                key: "study1",
                description: "linear two-state system, theta = (a, b)",
                model: study1_model(Study1Variant::H11, 0.0, 0.0, tau),
                theta: STUDY1_THETA.to_vec(),
                x0: STUDY1_X0.to_vec(),
                tau,
                span: (0.0, 1.0),
            },
            "fhn" | "fitzhugh-nagumo" => RegistryEntry {
                key: "fhn",
                description: "FitzHugh-Nagumo, theta = (a, b, c)",
                model: fhn_model(0.0, 0.0, tau),
                theta: FHN_THETA.to_vec(),
                x0: FHN_X0.to_vec(),
                tau,
                span: (0.0, 1.0),
            },
            "lotka-volterra" | "lv" => RegistryEntry {
                key: "lotka-volterra",
                description: "Lotka-Volterra, theta = (a, b, c, d)",
                model: lotka_volterra_model(0.0, 0.0, tau),
                theta: LV_THETA.to_vec(),
                x0: LV_X0.to_vec(),
                tau,
                span: (0.0, 1.0),
            },
            "tcell" => RegistryEntry {
                key: "tcell",
                description: "CD8+ T-cell log counts, theta = (rho_m, rho_s, delta_l, gamma_ms, gamma_sl)",
                model: tcell_model(
                    forcing.unwrap_or_else(ForcingCurve::synthetic_default),
                    tcell_delay(tau),
                    tau,
                ),
                theta: TCELL_THETA.to_vec(),
                x0: TCELL_X0.to_vec(),
                tau,
                span: (0.0, 0.9),
            },
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        Ok(entry)
    }
}
