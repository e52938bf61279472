use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{fd_step, rk4_solve, OdeModel, SolverOptions};

/// Residual table for `X = F + delta L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAltDiagnostic {
    pub deltas: Vec<f64>,
    /// `max_t |X'(t) - f(t, X(t)) - delta v1(t)|` per delta.
    pub residuals: Vec<f64>,
    /// `residual[i + 1] / residual[i]`; `None` when the earlier residual is zero.
    pub ratios: Vec<Option<f64>>,
    pub grid_points: usize,
    pub passed: bool,
}

/// `df/dx` by central differences.
pub fn state_jacobian(model: &OdeModel, t: f64, x: &[f64], theta: &[f64]) -> Vec<Vec<f64>> {
    let p = model.p();
    let mut xs = x.to_vec();
    let mut plus = vec![0.0; p];
    let mut minus = vec![0.0; p];
    let mut jac = vec![vec![0.0; p]; p];
    for j in 0..p {
        let h = fd_step(x[j], 1e-6);
        xs[j] = x[j] + h;
        model.rhs_into(t, &xs, theta, &mut plus);
        xs[j] = x[j] - h;
        model.rhs_into(t, &xs, theta, &mut minus);
        xs[j] = x[j];
        for i in 0..p {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// `v1 = L' - (df/dx) L` at a point of the null trajectory.
pub fn local_alt_v1(model: &OdeModel, theta: &[f64], t: f64, state: &[f64], l: &[f64], dl: &[f64]) -> Vec<f64> {
    let jac = state_jacobian(model, t, state, theta);
    (0..model.p())
        .map(|i| dl[i] - jac[i].iter().zip(l).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn derivative_4th<L: Fn(f64) -> Vec<f64>>(l: &L, t: f64, h: f64) -> Vec<f64> {
    let (a, b, c, d) = (l(t - 2.0 * h), l(t - h), l(t + h), l(t + 2.0 * h));
    (0..a.len())
        .map(|k| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h))
        .collect()
}

/// Check that the perturbed trajectory `F + delta L` satisfies
/// `X' = f(t, X) + delta v1 + o(delta)` on `span` by a residual ratio test.
///
/// Each residual must fall by at least `1.5 * delta[i+1] / delta[i]` relative
/// to the previous one, or be at rounding level (`<= 1e-9 delta`).
pub fn verify_local_alt_equivalence<L>(
    model: &OdeModel,
    theta0: &[f64],
    x0: &[f64],
    l: L,
    deltas: &[f64],
    span: (f64, f64),
    grid_points: usize,
) -> Result<LocalAltDiagnostic>
where
    L: Fn(f64) -> Vec<f64>,
{
    let p = model.p();
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Config("deltas must be positive".into()));
    }
    if grid_points < 2 || !(span.1 > span.0) {
        return Err(Error::Config("need at least two grid points on a non-empty span".into()));
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| span.0 + (span.1 - span.0) * i as f64 / (grid_points - 1) as f64)
        .collect();
    let traj = rk4_solve(model, theta0, x0, &grid, &SolverOptions::with_max_step((span.1 - span.0) / 4096.0))?;
    let fd_h = 1e-3 * (span.1 - span.0);

    let mut pts = Vec::with_capacity(grid_points);
    for (i, &t) in grid.iter().enumerate() {
        let lt = l(t);
        if lt.len() != p {
            return Err(Error::Dimension(format!("L(t) has length {}, model has p = {p}", lt.len())));
        }
        let dl = derivative_4th(&l, t, fd_h);
        let v1 = local_alt_v1(model, theta0, t, traj.state(i), &lt, &dl);
        pts.push((t, traj.state(i).to_vec(), traj.derivative(i).to_vec(), lt, dl, v1));
    }

    let mut residuals = Vec::with_capacity(deltas.len());
    let mut x = vec![0.0; p];
    let mut f = vec![0.0; p];
    for &delta in deltas {
        let mut worst = 0.0f64;
        for (t, state, deriv, lt, dl, v1) in &pts {
            for k in 0..p {
                x[k] = state[k] + delta * lt[k];
            }
            model.rhs_into(*t, &x, theta0, &mut f);
            for k in 0..p {
                let xdot = deriv[k] + delta * dl[k];
                worst = worst.max((xdot - f[k] - delta * v1[k]).abs());
            }
        }
        residuals.push(worst);
    }

    let mut ratios = Vec::with_capacity(deltas.len().saturating_sub(1));
    let mut passed = residuals.iter().all(|r| r.is_finite());
    for i in 1..deltas.len() {
        let ratio = (residuals[i - 1] > 0.0).then(|| residuals[i] / residuals[i - 1]);
        ratios.push(ratio);
        let at_floor = residuals[i] <= 1e-9 * deltas[i];
        let shrinks = ratio.is_some_and(|r| r <= 1.5 * deltas[i] / deltas[i - 1]);
        passed &= at_floor || shrinks;
    }
    Ok(LocalAltDiagnostic {
        deltas: deltas.to_vec(),
        residuals,
        ratios,
        grid_points,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::registry::{fhn_model, study1_model, FHN_THETA, FHN_X0, STUDY1_THETA, STUDY1_X0};
    use crate::ode::Study1Variant;

    const DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

    #[test]
    fn zero_perturbation_has_zero_residual() {
        let m = fhn_model(0.0, 0.0, 10.0);
        let d = verify_local_alt_equivalence(&m, &FHN_THETA, &FHN_X0, |_| vec![0.0, 0.0], &DELTAS, (0.0, 1.0), 101)
            .unwrap();
        assert!(d.residuals.iter().all(|r| *r == 0.0));
        assert!(d.passed);
    }

    #[test]
    fn constant_perturbation_on_linear_system() {
        let m = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let (a, b) = (STUDY1_THETA[0], STUDY1_THETA[1]);
        // rhs = tau * [[a, 0], [a, b]] x
        let l = [0.7, -1.3];
        let v1 = local_alt_v1(&m, &STUDY1_THETA, 0.4, &[0.2, 0.5], &l, &[0.0, 0.0]);
        let expect = [-10.0 * a * l[0], -10.0 * (a * l[0] + b * l[1])];
        for k in 0..2 {
            assert!((v1[k] - expect[k]).abs() < 1e-8, "{v1:?} vs {expect:?}");
        }
    }

    #[test]
    fn linear_and_fhn_pass_ratio_test() {
        let lin = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let l = |t: f64| vec![t.sin(), t.cos()];
        let d = verify_local_alt_equivalence(&lin, &STUDY1_THETA, &STUDY1_X0, l, &DELTAS, (0.0, 1.0), 201).unwrap();
        assert!(d.passed, "{d:?}");
        let fhn = fhn_model(0.0, 0.0, 10.0);
        let d = verify_local_alt_equivalence(&fhn, &FHN_THETA, &FHN_X0, l, &DELTAS, (0.0, 1.0), 201).unwrap();
        assert!(d.passed, "{d:?}");
        assert!(d.ratios.iter().all(|r| r.unwrap() <= 0.15));
    }
}
