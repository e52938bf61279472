//! Trajectory-matching test for the whole system.
//!
//! With residuals `e_i = Y_i - F(t_i; theta_hat)` and `K_ij = K((t_i - t_j)/h)`:
//!
//! ```text
//! V_n   = 1/(n(n-1))  sum_{i!=j} K_ij / h  e_i (.) e_j
//! Sigma = 2/(n(n-1))  sum_{i!=j} K_ij^2 / h  (e_i (.) e_j)(e_i (.) e_j)^T
//! TM_n  = n^2 h V_n^T Sigma^{-1} V_n   ~  chi2(p)
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fitted_states, nls_estimate, NlsConfig};
use crate::gof::common::for_each_close_pair;
use crate::gof::pvalue::Reference;
use crate::gof::report::{Bandwidths, Intermediates, TestId, TestReport};
use crate::ode::{OdeModel, SolverOptions};
use crate::smoothing::ObservationSet;

pub const CONDITION_LIMIT: f64 = 1e12;

/// `0.05 n^(-2/5)`.
pub fn default_tm_bandwidth(n: usize) -> f64 {
    0.05 * (n as f64).powf(-0.4)
}

/// `Y_i - F(t_i; theta)` as rows.
pub fn residuals_tm(
    data: &ObservationSet,
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    solver: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let fitted = fitted_states(model, theta, x0, data, solver)?;
    Ok(data
        .rows()
        .zip(fitted)
        .map(|(y, f)| y.iter().zip(&f).map(|(a, b)| a - b).collect())
        .collect())
}

fn check_inputs(e: &[Vec<f64>], times: &[f64], h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Bandwidth(h));
    }
    if e.len() != times.len() {
        return Err(Error::Dimension(format!("{} residual rows for {} times", e.len(), times.len())));
    }
    if e.len() < 2 {
        return Err(Error::InsufficientData("at least two residuals are needed".into()));
    }
    let p = e[0].len();
    if e.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("ragged residual rows".into()));
    }
    Ok(p)
}

pub fn vn_statistic(e: &[Vec<f64>], times: &[f64], h: f64) -> Result<Vec<f64>> {
    let p = check_inputs(e, times, h)?;
    let mut v = vec![0.0; p];
    for_each_close_pair(times, h, |i, j, k| {
        for c in 0..p {
            v[c] += k * e[i][c] * e[j][c];
        }
    });
    let n = e.len() as f64;
    let scale = 2.0 / (h * n * (n - 1.0));
    Ok(v.into_iter().map(|x| x * scale).collect())
}

pub fn sigma_hat_tm(e: &[Vec<f64>], times: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let p = check_inputs(e, times, h)?;
    let mut s = DMatrix::zeros(p, p);
    let mut prod = vec![0.0; p];
    for_each_close_pair(times, h, |i, j, k| {
        let k2 = k * k;
        for c in 0..p {
            prod[c] = e[i][c] * e[j][c];
        }
        for a in 0..p {
            for b in a..p {
                s[(a, b)] += k2 * prod[a] * prod[b];
            }
        }
    });
    let n = e.len() as f64;
    let scale = 4.0 / (h * n * (n - 1.0));
    for a in 0..p {
        for b in a..p {
            s[(a, b)] *= scale;
            s[(b, a)] = s[(a, b)];
        }
    }
    Ok(s)
}

/// `n^2 h V^T Sigma^{-1} V`, refusing ill-conditioned `Sigma`.
pub fn tm_quadratic_form(v: &[f64], sigma: &DMatrix<f64>, n: usize, h: f64) -> Result<f64> {
    let eig = SymmetricEigen::new(sigma.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularSigma { condition });
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(Error::SingularSigma { condition })?;
    let vv = DVector::from_column_slice(v);
    let x = chol.solve(&vv);
    let n = n as f64;
    Ok(n * n * h * vv.dot(&x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmConfig {
    pub nls: NlsConfig,
    /// Test bandwidth; `None` means `0.05 n^(-2/5)`.
    pub h: Option<f64>,
    pub level: f64,
}

impl Default for TmConfig {
    fn default() -> Self {
        TmConfig {
            nls: NlsConfig::default(),
            h: None,
            level: 0.05,
        }
    }
}

/// TM test at a given parameter value (estimation skipped).
pub fn tm_test_with_theta(
    data: &ObservationSet,
    model: &OdeModel,
    x0: &[f64],
    theta: &[f64],
    cfg: &TmConfig,
) -> Result<TestReport> {
    let n = data.len();
    let h = cfg.h.unwrap_or_else(|| default_tm_bandwidth(n));
    let e = residuals_tm(data, model, theta, x0, &cfg.nls.solver)?;
    let v = vn_statistic(&e, data.times(), h)?;
    let sigma = sigma_hat_tm(&e, data.times(), h)?;
    let stat = tm_quadratic_form(&v, &sigma, n, h)?;
    let sigma_rows = (0..sigma.nrows()).map(|r| sigma.row(r).iter().cloned().collect()).collect();
    Ok(TestReport::new(
        TestId::tm(),
        stat,
        Reference::ChiSquare { df: model.p() },
        cfg.level,
        n,
        theta.to_vec(),
        Bandwidths {
            h,
            ..Default::default()
        },
        Intermediates::Tm {
            v_n: v,
            sigma_hat: sigma_rows,
            residuals: e,
        },
    ))
}

/// Estimate `theta` by NLS, then run the TM test.
pub fn tm_test(data: &ObservationSet, model: &OdeModel, x0: &[f64], cfg: &TmConfig) -> Result<TestReport> {
    let est = nls_estimate(model, data, x0, &cfg.nls)?;
    tm_test_with_theta(data, model, x0, &est.theta_hat, cfg)
}
