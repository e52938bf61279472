use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{TestId, TestKind};
use crate::ode::registry::{fhn_model, lotka_volterra_model, study1_model};
use crate::ode::{ModelRegistry, OdeModel, Study1Variant};

/// How a local alternative enters the data-generating system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AltFamily {
    /// `X(t) = F(t; theta0) + delta L(t)`
    Trajectory,
    /// `X'(t) = f(t, X(t); theta0) + delta l(t)`
    Derivative,
}

/// A shrinking perturbation `delta * sin(2 pi freq t)` on selected components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAlternativeSpec {
    pub family: AltFamily,
    pub delta: f64,
    /// Zero-based components that carry the perturbation.
    pub components: Vec<usize>,
    /// Cycles over the unit time span.
    pub frequency: f64,
}

impl LocalAlternativeSpec {
    pub fn new(family: AltFamily, delta: f64, components: Vec<usize>) -> Self {
        LocalAlternativeSpec {
            family,
            delta,
            components,
            frequency: 1.0,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be non-negative, got {}", self.delta)));
        }
        if let Some(k) = self.components.iter().find(|&&k| k >= p) {
            return Err(Error::Dimension(format!("perturbed component {k} out of range for p = {p}")));
        }
        if !self.frequency.is_finite() {
            return Err(Error::Config("perturbation frequency must be finite".into()));
        }
        Ok(())
    }

    /// `L(t)` (or `l(t)`), unscaled.
    pub fn shape(&self, t: f64, p: usize) -> Vec<f64> {
        let v = (std::f64::consts::TAU * self.frequency * t).sin();
        let mut out = vec![0.0; p];
        for &k in &self.components {
            out[k] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    /// Registry key: `study1`, `fhn` or `lotka-volterra`.
    pub model: String,
    /// Disturbance family, used by `study1` only.
    pub variant: Study1Variant,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub sigma_eps: f64,
    pub tau: f64,
    /// Initial state; `None` uses the registry value.
    pub x0: Option<Vec<f64>>,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    pub tests: Vec<TestId>,
    pub local_alt: Option<LocalAlternativeSpec>,
    /// Use the true parameter instead of estimating it.
    pub oracle_theta: bool,
    /// GM bias gain; `None` means 1 for the linear study and 0.2 otherwise.
    pub c: Option<f64>,
    /// Starts for the estimators; the first start is always the true parameter.
    pub nls_multistart: usize,
    pub two_step_multistart: usize,
    /// Keep per-replication outcomes in the report.
    pub keep_replications: bool,
}

impl StudySpec {
    /// Defaults for study 1 (linear), 2 (FitzHugh-Nagumo) or 3 (Lotka-Volterra).
    pub fn study(number: u8) -> Result<Self> {
        let model = match number {
            1 => "study1",
            2 => "fhn",
            3 => "lotka-volterra",
            other => return Err(Error::Config(format!("unknown study {other}; expected 1, 2 or 3"))),
        };
        Ok(StudySpec {
            model: model.into(),
            variant: Study1Variant::H11,
            alpha: 0.0,
            beta: 0.0,
            n: 300,
            sigma_eps: 0.05,
            tau: 10.0,
            x0: None,
            replications: 1000,
            level: 0.05,
            seed: 0,
            tests: vec![TestId::tm(), TestId::im(0), TestId::im(1), TestId::gm(0), TestId::gm(1)],
            local_alt: None,
            oracle_theta: false,
            c: None,
            nls_multistart: 1,
            two_step_multistart: 1,
            keep_replications: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::Config(format!("sigma_eps must be positive, got {}", self.sigma_eps)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.n < 20 {
            return Err(Error::Config(format!("n must be at least 20, got {}", self.n)));
        }
        if self.nls_multistart == 0 || self.two_step_multistart == 0 {
            return Err(Error::Config("multistart counts must be at least 1".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::Config("no tests selected".into()));
        }
        let p = self.null_model()?.p();
        if let Some(x0) = &self.x0 {
            if x0.len() != p || x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("x0 must hold {p} finite values")));
            }
        }
        for t in &self.tests {
            if t.component.is_some_and(|k| k >= p) {
                return Err(Error::Dimension(format!("test {} out of range for p = {p}", t.label())));
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0) {
                return Err(Error::Config(format!("c must be positive, got {c}")));
            }
        }
        if let Some(alt) = &self.local_alt {
            alt.validate(p)?;
        }
        Ok(())
    }

    fn build(&self, alpha: f64, beta: f64) -> Result<OdeModel> {
        match self.model.as_str() {
            "study1" | "linear" => Ok(study1_model(self.variant, alpha, beta, self.tau)),
            "fhn" | "fitzhugh-nagumo" => Ok(fhn_model(alpha, beta, self.tau)),
            "lotka-volterra" | "lv" => Ok(lotka_volterra_model(alpha, beta, self.tau)),
            other => Err(Error::UnknownModel(format!("{other} (simulation supports study1, fhn, lotka-volterra)"))),
        }
    }

    /// The data-generating system, including disturbances.
    pub fn true_model(&self) -> Result<OdeModel> {
        self.build(self.alpha, self.beta)
    }

    /// The model under test.
    pub fn null_model(&self) -> Result<OdeModel> {
        self.build(0.0, 0.0)
    }

    pub fn theta0(&self) -> Result<Vec<f64>> {
        Ok(ModelRegistry::lookup_with(&self.model, self.tau, None)?.theta)
    }

    pub fn x0(&self) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x0) => Ok(x0.clone()),
            None => Ok(ModelRegistry::lookup_with(&self.model, self.tau, None)?.x0),
        }
    }

    pub fn gm_gain(&self) -> f64 {
        self.c.unwrap_or(match self.model.as_str() {
            "study1" | "linear" => 1.0,
            _ => 0.2,
        })
    }

    /// Row label for tables: `H11`, `FHN`, `LV`.
    pub fn hypothesis_label(&self) -> String {
        match self.model.as_str() {
            "study1" | "linear" => self.variant.label().to_string(),
            "fhn" | "fitzhugh-nagumo" => "FHN".into(),
            _ => "LV".into(),
        }
    }

    pub fn needs_component(&self, k: usize) -> bool {
        self.tests
            .iter()
            .any(|t| t.component == Some(k) && matches!(t.kind, TestKind::Im | TestKind::Gm))
    }
}
