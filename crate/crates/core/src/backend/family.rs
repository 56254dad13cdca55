//! Closed-form Gaussian families over `Omega = (-1, 1)^2` used by the
//! projection backend.

use crate::error::{Error, Result};

/// Linear map `xi(mu) = a * mu1 + b * mu2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    pub a: f64,
    pub b: f64,
}

impl LinearMap {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn apply(&self, mu: &[f64]) -> f64 {
        self.a * mu[0] + self.b * mu[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticFamily {
    /// Constant anisotropy: center `(0.1 (mu1 - mu2), mu1 + mu2)`.
    F1,
    /// Constant along circles: center `(|mu|^2, |mu|^2)`.
    F2,
    /// Crossing near-singular lines through the origin.
    F3,
    /// `F3` with user-supplied linear maps for the two centers.
    F3Xi { xi1: LinearMap, xi2: LinearMap },
}

impl AnalyticFamily {
    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "f1" => Ok(Self::F1),
            "f2" => Ok(Self::F2),
            "f3" => Ok(Self::F3),
            "f3xi" => Ok(Self::F3Xi { xi1: LinearMap::new(1.0, 1.0), xi2: LinearMap::new(1.0, -1.0) }),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F3Xi { .. } => "f3xi",
        }
    }

    /// Per-axis `(center, width)` with `f = prod_i exp(-(x_i - c_i)^2 / s_i)`.
    pub fn gaussian(&self, mu: &[f64]) -> [(f64, f64); 2] {
        let (m1, m2) = (mu[0], mu[1]);
        match self {
            Self::F1 => [(0.1 * (m1 - m2), 0.01), (m1 + m2, 0.01)],
            Self::F2 => {
                let r = m1 * m1 + m2 * m2;
                [(r, 0.01), (r, 0.01)]
            }
            Self::F3 => near_singular(m1 + 3.0 * m2, 3.0 * m1 - m2),
            Self::F3Xi { xi1, xi2 } => near_singular(xi1.apply(mu), xi2.apply(mu)),
        }
    }

    /// Value at spatial point `x` for parameter `mu`.
    pub fn evaluate(&self, x: &[f64], mu: &[f64]) -> f64 {
        let g = self.gaussian(mu);
        (-(x[0] - g[0].0).powi(2) / g[0].1 - (x[1] - g[1].0).powi(2) / g[1].1).exp()
    }
}

fn near_singular(xi1: f64, xi2: f64) -> [(f64, f64); 2] {
    [(xi1, 0.1 + 5.0 * xi1.abs()), (xi2, 0.1 + 5.0 * xi2.abs())]
}

/// `family(x; mu)` by family id.
pub fn evaluate_family(family: &str, x: &[f64], mu: &[f64]) -> Result<f64> {
    Ok(AnalyticFamily::parse(family)?.evaluate(x, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        assert_eq!(evaluate_family("f1", &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(evaluate_family("f3", &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn f2_by_hand() {
        let v = evaluate_family("f2", &[0.5, 0.5], &[0.5, 0.0]).unwrap();
        let expected = (-2.0f64 * 0.25 * 0.25 / 0.01).exp();
        assert!((v - expected).abs() <= 1e-15 * expected);
        assert!((v - (-12.5f64).exp()).abs() <= 1e-15 * expected);
    }

    #[test]
    fn unknown_family() {
        assert!(matches!(evaluate_family("f9", &[0.0, 0.0], &[0.0, 0.0]), Err(Error::UnknownFamily(_))));
    }
}
