use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothing::data::ObservationSet;
use crate::smoothing::kde::{check_bandwidth, kde_at, nw_parts_at};
use crate::smoothing::local_poly::{local_linear_into, local_quadratic_deriv_into};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Kde,
    KdeDerivative,
    NwNumerator,
    NwNumeratorDerivative,
    LocalLinear,
    LocalQuadraticDerivative,
}

/// A nonparametric estimate bound to its data and bandwidth, evaluable anywhere.
///
/// KDE curves return a single value; the other kinds return one value per
/// selected component, in the order given at construction.
#[derive(Debug, Clone)]
pub struct SmoothedCurve {
    data: Arc<ObservationSet>,
    h: f64,
    kind: EstimatorKind,
    components: Vec<usize>,
}

impl SmoothedCurve {
    pub fn new(data: Arc<ObservationSet>, h: f64, kind: EstimatorKind, components: Vec<usize>) -> Result<Self> {
        check_bandwidth(h)?;
        if let Some(&k) = components.iter().find(|&&k| k >= data.dim()) {
            return Err(Error::Dimension(format!("component {k} out of range for p = {}", data.dim())));
        }
        let components = match kind {
            EstimatorKind::Kde | EstimatorKind::KdeDerivative => Vec::new(),
            _ if components.is_empty() => (0..data.dim()).collect(),
            _ => components,
        };
        Ok(SmoothedCurve {
            data,
            h,
            kind,
            components,
        })
    }

    pub fn kde(data: Arc<ObservationSet>, h: f64) -> Result<Self> {
        Self::new(data, h, EstimatorKind::Kde, Vec::new())
    }

    pub fn kde_deriv(data: Arc<ObservationSet>, h: f64) -> Result<Self> {
        Self::new(data, h, EstimatorKind::KdeDerivative, Vec::new())
    }

    /// `(h_k, h'_k)` for zero-based component `k`.
    pub fn nw_parts(data: Arc<ObservationSet>, h: f64, k: usize) -> Result<(Self, Self)> {
        Ok((
            Self::new(data.clone(), h, EstimatorKind::NwNumerator, vec![k])?,
            Self::new(data, h, EstimatorKind::NwNumeratorDerivative, vec![k])?,
        ))
    }

    /// Empty `components` selects all of them.
    pub fn local_linear(data: Arc<ObservationSet>, h: f64, components: Vec<usize>) -> Result<Self> {
        Self::new(data, h, EstimatorKind::LocalLinear, components)
    }

    pub fn local_quadratic_deriv(data: Arc<ObservationSet>, h: f64, components: Vec<usize>) -> Result<Self> {
        Self::new(data, h, EstimatorKind::LocalQuadraticDerivative, components)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn data(&self) -> &ObservationSet {
        &self.data
    }

    pub fn output_len(&self) -> usize {
        self.components.len().max(1)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let d = &*self.data;
        match self.kind {
            EstimatorKind::Kde => out[0] = kde_at(d, self.h, t)?.0,
            EstimatorKind::KdeDerivative => out[0] = kde_at(d, self.h, t)?.1,
            EstimatorKind::NwNumerator => {
                for (o, &k) in out.iter_mut().zip(&self.components) {
                    *o = nw_parts_at(d, self.h, k, t)?.0;
                }
            }
            EstimatorKind::NwNumeratorDerivative => {
                for (o, &k) in out.iter_mut().zip(&self.components) {
                    *o = nw_parts_at(d, self.h, k, t)?.1;
                }
            }
            EstimatorKind::LocalLinear => local_linear_into(d, self.h, &self.components, t, out)?,
            EstimatorKind::LocalQuadraticDerivative => {
                local_quadratic_deriv_into(d, self.h, &self.components, t, out)?
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_len()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }
}
