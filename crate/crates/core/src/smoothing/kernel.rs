use serde::{Deserialize, Serialize};

/// `K(u) = 0.75 (1 - u^2)` on `[-1, 1]`, zero elsewhere.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// `K'(u) = -1.5 u` on the open support, zero elsewhere (including `|u| = 1`).
#[inline]
pub fn epanechnikov_deriv(u: f64) -> f64 {
    if u.abs() < 1.0 {
        -1.5 * u
    } else {
        0.0
    }
}

/// Smoothing kernel. Only Epanechnikov is provided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
}

impl Kernel {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => epanechnikov(u),
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => epanechnikov_deriv(u),
        }
    }

    /// Support `[-r, r]`.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// `int u^2 K(u) du`
    pub fn second_moment(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.2,
        }
    }

    /// `int u^4 K(u) du`
    pub fn fourth_moment(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 3.0 / 35.0,
        }
    }

    /// `int K(u)^2 du`
    pub fn roughness(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
        }
    }

    /// `int u^2 K(u)^2 du`
    pub fn weighted_roughness(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 3.0 / 35.0,
        }
    }
}
