use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Reference distribution of a test statistic; p-values are upper tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    ChiSquare { df: usize },
    StandardNormal,
}

impl Reference {
    pub fn label(&self) -> String {
        match self {
            Reference::ChiSquare { df } => format!("chi2({df})"),
            Reference::StandardNormal => "N(0,1) upper".into(),
        }
    }
}

pub fn p_value(statistic: f64, reference: Reference) -> f64 {
    if statistic.is_nan() {
        return f64::NAN;
    }
    match reference {
        Reference::ChiSquare { df } => {
            if statistic <= 0.0 {
                return 1.0;
            }
            ChiSquared::new(df as f64).expect("df > 0").sf(statistic)
        }
        Reference::StandardNormal => Normal::standard().sf(statistic),
    }
}
