//! Box-shaped parameter domains and points inside them.

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]` in `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "bounds of direction {i} must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The square `[lo, hi]^p`.
    pub fn cube(p: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; p], vec![hi; p])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn extents(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.extent(i)).collect()
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<ParameterPoint> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        if !self.contains(&coords) {
            return Err(Error::OutsideDomain { point: coords });
        }
        Ok(ParameterPoint(coords))
    }

    pub fn centroid(&self) -> ParameterPoint {
        ParameterPoint(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(lo, hi)| 0.5 * (lo + hi))
                .collect(),
        )
    }

    /// All `2^p` vertices of the box, in binary counting order (bit `i` set
    /// selects the upper bound in direction `i`).
    pub fn corners(&self) -> Vec<ParameterPoint> {
        let p = self.dim();
        (0..1usize << p)
            .map(|mask| {
                ParameterPoint(
                    (0..p)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                self.upper[i]
                            } else {
                                self.lower[i]
                            }
                        })
                        .collect(),
                )
            })
            .collect()
    }

    /// Tensor lattice with `n` equispaced nodes per direction (endpoints
    /// included), first coordinate fastest.
    pub fn lattice(&self, n: usize) -> Vec<ParameterPoint> {
        let counts = vec![n; self.dim()];
        self.lattice_with(&counts)
    }

    pub fn lattice_with(&self, counts: &[usize]) -> Vec<ParameterPoint> {
        assert_eq!(counts.len(), self.dim());
        assert!(counts.iter().all(|&c| c >= 2), "lattice needs >= 2 nodes per direction");
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim()];
        for _ in 0..total {
            let coords = idx
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    if k + 1 == counts[i] {
                        self.upper[i]
                    } else {
                        self.lower[i] + self.extent(i) * k as f64 / (counts[i] - 1) as f64
                    }
                })
                .collect();
            out.push(ParameterPoint(coords));
            for (i, k) in idx.iter_mut().enumerate() {
                *k += 1;
                if *k < counts[i] {
                    break;
                }
                *k = 0;
            }
        }
        out
    }

    /// Projects `coords` onto the box.
    pub fn clamp(&self, coords: &mut [f64]) {
        for (i, x) in coords.iter_mut().enumerate() {
            *x = x.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// A parameter value `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Exact bit pattern of the coordinates, usable as a hash key.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|x| x.to_bits()).collect()
    }

    pub fn euclidean_distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ParameterPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
