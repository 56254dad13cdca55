//! Finite-difference Hessians of reduced coefficients, the semi-definite
//! metric derived from them, and the two-endpoint trapezoidal distance.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{Error, Result};

/// Symmetric `p x p` matrix of second differences.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix(DMatrix<f64>);

impl HessianMatrix {
    /// Symmetrizes `m` as `(m + m^T) / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let sym = (&m + m.transpose()) * 0.5;
        Self(sym)
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Symmetric positive semi-definite tensor `M(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor(DMatrix<f64>);

impl MetricTensor {
    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        assert!(diag.iter().all(|d| *d >= 0.0));
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    /// Builds a tensor from a symmetric matrix, projecting it onto the PSD
    /// cone by clamping negative eigenvalues to zero.
    pub fn from_symmetric_clamped(m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        if p == 1 {
            return Self(DMatrix::from_element(1, 1, m[(0, 0)].max(0.0)));
        }
        let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
            return Self(symmetrize((&m + m.transpose()) * 0.5));
        }
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        Self(symmetrize(v * DMatrix::from_diagonal(&clamped) * v.transpose()))
    }

    /// Wraps a matrix that is already known to be symmetric PSD.
    pub fn from_psd_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// `d^T M d`.
    #[inline]
    pub fn quad_form(&self, d: &[f64]) -> f64 {
        quad_form(self.0.as_slice(), d)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Quadratic form over a column-major `p x p` slice.
#[inline]
pub fn quad_form(m: &[f64], d: &[f64]) -> f64 {
    let p = d.len();
    debug_assert_eq!(m.len(), p * p);
    let mut acc = 0.0;
    for j in 0..p {
        let col = &m[j * p..(j + 1) * p];
        let mut s = 0.0;
        for i in 0..p {
            s += col[i] * d[i];
        }
        acc += s * d[j];
    }
    acc
}

/// Default stencil increments: a thousandth of each domain extent.
pub fn default_increments(domain: &ParameterDomain) -> Vec<f64> {
    domain.extents().iter().map(|e| 1e-3 * e).collect()
}

/// Finite-difference Hessian of a vector of reduced coefficients,
/// `H_ij = sum_n v_n(mu) D_ij v_n(mu)`, weighting each mode by its value at
/// the stencil center.
///
/// The stencil is `mu + sum_i alpha_i delta_i` with `alpha_i in {-1, 0, 1}`
/// and at most two nonzero entries. Near the boundary the whole stencil is
/// shifted inward so every evaluation lies in `domain`.
pub fn estimate_hessian<F>(
    evaluate_coeffs: F,
    mu: &ParameterPoint,
    delta: &[f64],
    domain: &ParameterDomain,
) -> Result<HessianMatrix>
where
    F: FnMut(&ParameterPoint) -> Result<Vec<f64>>,
{
    hessian_impl(evaluate_coeffs, None, mu, delta, domain)
}

/// Same as [`estimate_hessian`] but with explicit mode weights instead of
/// the coefficient values at the center.
pub fn estimate_hessian_weighted<F>(
    evaluate_coeffs: F,
    weights: &[f64],
    mu: &ParameterPoint,
    delta: &[f64],
    domain: &ParameterDomain,
) -> Result<HessianMatrix>
where
    F: FnMut(&ParameterPoint) -> Result<Vec<f64>>,
{
    hessian_impl(evaluate_coeffs, Some(weights), mu, delta, domain)
}

/// Center of the finite-difference stencil after shifting it into `domain`.
pub fn stencil_center(mu: &ParameterPoint, delta: &[f64], domain: &ParameterDomain) -> Result<Vec<f64>> {
    let p = domain.dim();
    if mu.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: mu.dim() });
    }
    if delta.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: delta.len() });
    }
    let mut center = mu.coords().to_vec();
    for i in 0..p {
        if !(delta[i] > 0.0) {
            return Err(Error::ZeroIncrement { direction: i });
        }
        if 2.0 * delta[i] > domain.extent(i) {
            return Err(Error::InvalidDomain(format!(
                "stencil increment {} exceeds half the extent of direction {i}",
                delta[i]
            )));
        }
        let lo = domain.lower()[i] + delta[i];
        let hi = domain.upper()[i] - delta[i];
        center[i] = center[i].clamp(lo, hi);
    }
    Ok(center)
}

fn hessian_impl<F>(
    mut eval: F,
    weights: Option<&[f64]>,
    mu: &ParameterPoint,
    delta: &[f64],
    domain: &ParameterDomain,
) -> Result<HessianMatrix>
where
    F: FnMut(&ParameterPoint) -> Result<Vec<f64>>,
{
    let p = domain.dim();
    let center = stencil_center(mu, delta, domain)?;
    let at = |offsets: &[(usize, f64)]| {
        let mut c = center.clone();
        for &(i, s) in offsets {
            c[i] += s * delta[i];
        }
        ParameterPoint(c)
    };

    let v0 = eval(&ParameterPoint(center.clone()))?;
    let n = v0.len();
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
            w.to_vec()
        }
        None => v0.clone(),
    };
    let check = |v: Vec<f64>| -> Result<Vec<f64>> {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        Ok(v)
    };

    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        let plus = check(eval(&at(&[(i, 1.0)]))?)?;
        let minus = check(eval(&at(&[(i, -1.0)]))?)?;
        let inv = 1.0 / (delta[i] * delta[i]);
        h[(i, i)] = (0..n)
            .map(|k| w[k] * (plus[k] - 2.0 * v0[k] + minus[k]) * inv)
            .sum();
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let pp = check(eval(&at(&[(i, 1.0), (j, 1.0)]))?)?;
            let mp = check(eval(&at(&[(i, -1.0), (j, 1.0)]))?)?;
            let pm = check(eval(&at(&[(i, 1.0), (j, -1.0)]))?)?;
            let mm = check(eval(&at(&[(i, -1.0), (j, -1.0)]))?)?;
            let inv = 1.0 / (4.0 * delta[i] * delta[j]);
            let hij: f64 = (0..n)
                .map(|k| w[k] * (pp[k] - mp[k] - pm[k] + mm[k]) * inv)
                .sum();
            h[(i, j)] = hij;
            h[(j, i)] = hij;
        }
    }
    Ok(HessianMatrix::from_matrix(h))
}

/// `M = V |Lambda| V^T` for `H = V Lambda V^T`.
pub fn metric_from_hessian(h: &HessianMatrix) -> MetricTensor {
    let m = h.matrix();
    if m.nrows() == 1 {
        return MetricTensor(DMatrix::from_element(1, 1, m[(0, 0)].abs()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let abs = eig.eigenvalues.map(f64::abs);
    let v = &eig.eigenvectors;
    MetricTensor(symmetrize(v * DMatrix::from_diagonal(&abs) * v.transpose()))
}

/// Trapezoidal approximation of the geodesic length between two points,
/// `0.5 sqrt(D^T M1 D) + 0.5 sqrt(D^T M2 D)` with `D = mu2 - mu1`.
pub fn distance(m1: (&MetricTensor, &ParameterPoint), m2: (&MetricTensor, &ParameterPoint)) -> Result<f64> {
    let (t1, a) = m1;
    let (t2, b) = m2;
    let p = a.dim();
    if b.dim() != p || t1.dim() != p || t2.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: b.dim() });
    }
    let d: Vec<f64> = b.coords().iter().zip(a.coords()).map(|(x, y)| x - y).collect();
    trapezoid(t1.quad_form(&d), t2.quad_form(&d), t1, t2, &d)
}

fn trapezoid(q1: f64, q2: f64, t1: &MetricTensor, t2: &MetricTensor, d: &[f64]) -> Result<f64> {
    Ok(0.5 * checked_sqrt(q1, t1, d)? + 0.5 * checked_sqrt(q2, t2, d)?)
}

fn checked_sqrt(q: f64, t: &MetricTensor, d: &[f64]) -> Result<f64> {
    if q >= 0.0 {
        return Ok(q.sqrt());
    }
    let scale = t.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()))
        * d.iter().map(|x| x * x).sum::<f64>();
    if q >= -1e-12 * scale {
        Ok(0.0)
    } else {
        Err(Error::NonPsdMetric { value: q })
    }
}

/// Hot-loop variant of [`distance`] over raw column-major slices. Tiny
/// negative forms caused by roundoff are treated as zero.
#[inline]
pub fn distance_raw(m1: &[f64], a: &[f64], m2: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
    for ((s, x), y) in scratch.iter_mut().zip(b).zip(a) {
        *s = x - y;
    }
    let q1 = quad_form(m1, scratch).max(0.0);
    let q2 = quad_form(m2, scratch).max(0.0);
    0.5 * q1.sqrt() + 0.5 * q2.sqrt()
}
