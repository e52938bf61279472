use serde::{Deserialize, Serialize};

use crate::gof::pvalue::{p_value, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Tm,
    Im,
    Gm,
}

impl TestKind {
    pub fn prefix(&self) -> &'static str {
        match self {
            TestKind::Tm => "TM",
            TestKind::Im => "IM",
            TestKind::Gm => "GM",
        }
    }
}

/// Which test on which component: `TM`, `IM1`, `GM2`, ... (labels are one-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestId {
    pub kind: TestKind,
    /// Zero-based component; `None` for the whole-system test.
    pub component: Option<usize>,
}

impl TestId {
    pub fn tm() -> Self {
        TestId {
            kind: TestKind::Tm,
            component: None,
        }
    }

    pub fn im(k: usize) -> Self {
        TestId {
            kind: TestKind::Im,
            component: Some(k),
        }
    }

    pub fn gm(k: usize) -> Self {
        TestId {
            kind: TestKind::Gm,
            component: Some(k),
        }
    }

    pub fn label(&self) -> String {
        match self.component {
            Some(k) => format!("{}{}", self.kind.prefix(), k + 1),
            None => self.kind.prefix().to_string(),
        }
    }

    /// Parse `TM`, `IM2`, `gm1`, ...
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_uppercase();
        if s == "TM" {
            return Some(Self::tm());
        }
        let (head, tail) = s.split_at(s.len().min(2));
        let k: usize = tail.parse().ok()?;
        if k == 0 {
            return None;
        }
        match head {
            "IM" => Some(Self::im(k - 1)),
            "GM" => Some(Self::gm(k - 1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    /// Test bandwidth.
    pub h: f64,
    /// Local linear smoothing bandwidth, per component.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h0: Option<Vec<f64>>,
    /// Local quadratic derivative bandwidth for the tested component.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h1: Option<f64>,
    /// Collocation bandwidths used by the two-step estimator, per component.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h_e: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum Intermediates {
    Tm {
        v_n: Vec<f64>,
        sigma_hat: Vec<Vec<f64>>,
        residuals: Vec<Vec<f64>>,
    },
    Im {
        adjusted: bool,
        /// `IM^l` per sub-interval (`None` when skipped); a single entry for the plain form.
        per_interval: Vec<Option<f64>>,
        n_used: usize,
        mu_n: f64,
        residuals: Vec<f64>,
    },
    Gm {
        v1: f64,
        v2: f64,
        s_hat: f64,
        /// Variance used in the statistic: jackknife, pooled over both halves.
        sigma_hat: f64,
        /// Projection estimate from the symmetrized order-5 kernel on the first half.
        sigma_projection: f64,
        c: f64,
        n_tilde: usize,
        split_seed: u64,
        /// Indices (into the sorted sample) of the first half.
        first_half: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub id: TestId,
    pub label: String,
    pub statistic: f64,
    pub reference: Reference,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub bandwidths: Bandwidths,
    pub intermediates: Intermediates,
}

impl TestReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: TestId,
        statistic: f64,
        reference: Reference,
        level: f64,
        n: usize,
        theta_hat: Vec<f64>,
        bandwidths: Bandwidths,
        intermediates: Intermediates,
    ) -> Self {
        let p = p_value(statistic, reference);
        TestReport {
            id,
            label: id.label(),
            statistic,
            reference,
            p_value: p,
            level,
            reject: p < level,
            n,
            theta_hat,
            bandwidths,
            intermediates,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for id in [TestId::tm(), TestId::im(0), TestId::gm(2)] {
            assert_eq!(TestId::parse(&id.label()), Some(id));
        }
        assert_eq!(TestId::parse("gm1"), Some(TestId::gm(0)));
        assert_eq!(TestId::parse("IM0"), None);
        assert_eq!(TestId::parse("XX1"), None);
    }
}
