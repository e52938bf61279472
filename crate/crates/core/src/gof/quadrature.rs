use crate::error::{Error, Result};

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F>(mut f: F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let panels = (panels.max(2) + 1) & !1;
    let h = (b - a) / panels as f64;
    let mut eval = |t: f64| -> Result<f64> {
        let v = f(t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Quadrature { t })
        }
    };
    let mut sum = eval(a)? + eval(b)?;
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * eval(a + i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Composite trapezoid rule, used as an independent cross-check.
pub fn trapezoid<F>(mut f: F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.5 * (f(a)? + f(b)?);
    for i in 1..panels {
        sum += f(a + i as f64 * h)?;
    }
    Ok(sum * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|t| Ok(t * t * t - 2.0 * t + 1.0), 0.0, 2.0, 2).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_panel_count_rounds_up() {
        let v = simpson(|t| Ok(t.sin()), 0.0, std::f64::consts::PI, 7).unwrap();
        assert!((v - 2.0).abs() < 1e-3);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = simpson(|t| Ok(1.0 / (t - 0.5)), 0.0, 1.0, 4).unwrap_err();
        assert_eq!(err, Error::Quadrature { t: 0.5 });
    }

    #[test]
    fn trapezoid_converges() {
        let v = trapezoid(|t| Ok(t.exp()), 0.0, 1.0, 4000).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-7);
    }
}
