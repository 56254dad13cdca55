//! Truth layer: parametrized solution families, inner products, exact
//! errors, and the affinely decomposed Galerkin problem.

pub mod family;
pub mod fem;
pub mod grid;

use nalgebra::{DMatrix, DVector};

pub use family::{evaluate_family, AnalyticFamily, LinearMap};
pub use fem::{BoundaryData, CdConfig, GalerkinCd};
pub use grid::SpatialGrid;

use crate::domain::ParameterPoint;
use crate::error::{Error, Result};
use crate::linalg::{dot, CsrMatrix};
use crate::online::select_local_basis;

/// Norm in which approximation errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Maximum absolute nodal value.
    LInf,
    L2,
    H1,
}

impl ErrorNorm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linf" => Some(Self::LInf),
            "l2" => Some(Self::L2),
            "h1" => Some(Self::H1),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LInf => "linf",
            Self::L2 => "l2",
            Self::H1 => "h1",
        }
    }
}

/// A truth solution `v(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub mu: ParameterPoint,
    pub coeffs: Vec<f64>,
}

/// Parameter functions weighting the affine blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// `g = (10^mu1, sin mu2, cos mu2)`, with `h_q = g_q`.
    ConvectionDiffusion,
}

impl CoefficientKind {
    pub fn name(self) -> &'static str {
        "convection-diffusion"
    }

    pub fn parse(s: &str) -> Option<Self> {
        (s == "convection-diffusion").then_some(Self::ConvectionDiffusion)
    }

    pub fn theta_a(self, mu: &[f64]) -> Vec<f64> {
        match self {
            Self::ConvectionDiffusion => vec![10f64.powf(mu[0]), mu[1].sin(), mu[1].cos()],
        }
    }

    pub fn theta_f(self, mu: &[f64]) -> Vec<f64> {
        self.theta_a(mu)
    }

    pub fn q_a(self) -> usize {
        3
    }

    pub fn q_f(self) -> usize {
        3
    }
}

/// Parameter-independent blocks of `a(w, v; mu) = sum_q g_q(mu) a_q(w, v)`
/// and `f(v; mu) = sum_q h_q(mu) f_q(v)`.
///
/// `operators[q]` stores `a_q(phi_c, phi_r)` at row `r`, column `c`;
/// `functionals[q]` stores `f_q(phi_r)`.
#[derive(Debug, Clone)]
pub struct AffineForms {
    pub operators: Vec<CsrMatrix>,
    pub functionals: Vec<Vec<f64>>,
    pub kind: CoefficientKind,
}

impl AffineForms {
    pub fn q_a(&self) -> usize {
        self.operators.len()
    }

    pub fn q_f(&self) -> usize {
        self.functionals.len()
    }
}

/// Explicit family sampled on a lattice, approximated by orthogonal
/// projection in the quadrature-weighted L2 product.
#[derive(Debug, Clone)]
pub struct AnalyticL2 {
    family: AnalyticFamily,
    grid: SpatialGrid,
    weights: Vec<f64>,
    norm: ErrorNorm,
}

/// Rank-one representation `v = x (outer) y` of a separable snapshot, with the
/// first spatial coordinate running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl AnalyticL2 {
    pub fn new(family: AnalyticFamily, grid: SpatialGrid, norm: ErrorNorm) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: grid.dim() });
        }
        if norm == ErrorNorm::H1 {
            return Err(Error::Config("the projection backend measures errors in linf or l2".into()));
        }
        let weights = grid.weights();
        Ok(Self { family, grid, weights, norm })
    }

    /// The lattice used in the experiments: 75 x 75 nodes on `(-1, 1)^2`.
    pub fn standard(family: AnalyticFamily) -> Self {
        Self::new(family, SpatialGrid::square(75, -1.0, 1.0).expect("valid grid"), ErrorNorm::LInf)
            .expect("valid backend")
    }

    pub fn family(&self) -> AnalyticFamily {
        self.family
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm_kind(&self) -> ErrorNorm {
        self.norm
    }

    pub fn factors(&self, mu: &[f64]) -> Separable {
        let g = self.family.gaussian(mu);
        let axis = |a: usize| -> Vec<f64> {
            let (c, s) = g[a];
            self.grid.axis_nodes(a).iter().map(|x| (-(x - c) * (x - c) / s).exp()).collect()
        };
        Separable { x: axis(0), y: axis(1) }
    }

    /// Weighted L2 product of two separable functions.
    pub fn factor_inner(&self, a: &Separable, b: &Separable) -> f64 {
        let wx = self.grid.axis_weights(0);
        let wy = self.grid.axis_weights(1);
        let sx: f64 = (0..wx.len()).map(|i| wx[i] * a.x[i] * b.x[i]).sum();
        let sy: f64 = (0..wy.len()).map(|j| wy[j] * a.y[j] * b.y[j]).sum();
        sx * sy
    }

    pub fn expand(&self, f: &Separable) -> Vec<f64> {
        let mut v = Vec::with_capacity(f.x.len() * f.y.len());
        for &b in &f.y {
            v.extend(f.x.iter().map(|a| a * b));
        }
        v
    }

    pub fn evaluate(&self, mu: &[f64]) -> Vec<f64> {
        self.expand(&self.factors(mu))
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| w * x * y).sum()
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self.norm {
            ErrorNorm::LInf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            _ => self.inner(v, v).max(0.0).sqrt(),
        }
    }

    /// `norm(x y^T - sum_i c_i x_i y_i^T)` without materializing the snapshots.
    pub fn separable_residual_norm(&self, target: &Separable, terms: &[(f64, &Separable)]) -> f64 {
        let nx = target.x.len();
        let mut col = vec![0.0; nx];
        let mut acc = 0.0f64;
        for j in 0..target.y.len() {
            let b = target.y[j];
            for (c, t) in col.iter_mut().zip(&target.x) {
                *c = b * t;
            }
            for &(ci, f) in terms {
                let s = ci * f.y[j];
                if s != 0.0 {
                    for (c, t) in col.iter_mut().zip(&f.x) {
                        *c -= s * t;
                    }
                }
            }
            match self.norm {
                ErrorNorm::LInf => acc = col.iter().fold(acc, |m, x| m.max(x.abs())),
                _ => {
                    let wy = self.grid.axis_weights(1)[j];
                    let wx = self.grid.axis_weights(0);
                    acc += wy * col.iter().zip(wx).map(|(x, w)| w * x * x).sum::<f64>();
                }
            }
        }
        match self.norm {
            ErrorNorm::LInf => acc,
            _ => acc.max(0.0).sqrt(),
        }
    }
}

/// The truth problem behind a reduced model.
#[derive(Debug, Clone)]
pub enum ProblemBackend {
    AnalyticL2(AnalyticL2),
    GalerkinCd(GalerkinCd),
}

impl ProblemBackend {
    pub fn is_galerkin(&self) -> bool {
        matches!(self, Self::GalerkinCd(_))
    }

    /// Length of a truth coefficient vector.
    pub fn truth_len(&self) -> usize {
        match self {
            Self::AnalyticL2(a) => a.grid().len(),
            Self::GalerkinCd(g) => g.len(),
        }
    }

    pub fn norm_kind(&self) -> ErrorNorm {
        match self {
            Self::AnalyticL2(a) => a.norm_kind(),
            Self::GalerkinCd(g) => g.config().norm,
        }
    }

    pub fn truth_solve(&self, mu: &ParameterPoint) -> Result<Snapshot> {
        let coeffs = match self {
            Self::AnalyticL2(a) => {
                if mu.dim() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: mu.dim() });
                }
                a.evaluate(mu.coords())
            }
            Self::GalerkinCd(g) => g.solve(mu.coords())?,
        };
        Ok(Snapshot { mu: mu.clone(), coeffs })
    }

    /// Vector in the (homogeneous) approximation space for a truth vector.
    pub fn reduced_space_vector(&self, truth: &[f64]) -> Vec<f64> {
        match self {
            Self::AnalyticL2(_) => truth.to_vec(),
            Self::GalerkinCd(g) => truth.iter().zip(g.lifting()).map(|(u, l)| u - l).collect(),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.truth_len() {
            return Err(Error::DimensionMismatch { expected: self.truth_len(), got: v.len() });
        }
        Ok(())
    }

    pub fn inner_vectors(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(match self {
            Self::AnalyticL2(a) => a.inner(u, v),
            Self::GalerkinCd(g) => g.inner(u, v),
        })
    }

    pub fn inner_product(&self, u: &Snapshot, v: &Snapshot) -> Result<f64> {
        self.inner_vectors(&u.coeffs, &v.coeffs)
    }

    /// Error norm of a truth-space vector.
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            Self::AnalyticL2(a) => a.norm(v),
            Self::GalerkinCd(g) => g.norm(v),
        }
    }

    pub fn affine_terms(&self) -> Result<&AffineForms> {
        match self {
            Self::AnalyticL2(_) => Err(Error::NotGalerkin),
            Self::GalerkinCd(g) => Ok(g.forms()),
        }
    }

    /// Exact error of the best (projection) or Galerkin approximation of
    /// `v(mu)` from `span(basis)`. Nearly dependent basis vectors are dropped.
    pub fn exact_error(&self, mu: &ParameterPoint, basis: &[Snapshot]) -> Result<f64> {
        let truth = self.truth_solve(mu)?;
        let (u, _) = self.approximate(mu, &truth.coeffs, basis)?;
        let diff: Vec<f64> = truth.coeffs.iter().zip(&u).map(|(a, b)| a - b).collect();
        Ok(self.norm(&diff))
    }

    /// Approximation of the truth vector from `span(basis)`; returns the
    /// truth-space approximation and its coefficients in the kept basis.
    pub fn approximate(&self, mu: &ParameterPoint, truth: &[f64], basis: &[Snapshot]) -> Result<(Vec<f64>, Vec<f64>)> {
        for b in basis {
            self.check_len(&b.coeffs)?;
        }
        let rb: Vec<Vec<f64>> = basis.iter().map(|b| self.reduced_space_vector(&b.coeffs)).collect();
        let n = rb.len();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.inner_vectors(&rb[i], &rb[j])?;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let order = 0..n;
        let (kept, ortho) = select_local_basis(|i, j| gram[(i, j)], order, n)?;
        let m = kept.len();
        let mut approx = match self {
            Self::AnalyticL2(_) => vec![0.0; truth.len()],
            Self::GalerkinCd(g) => g.lifting().to_vec(),
        };
        if m == 0 {
            return Ok((approx, Vec::new()));
        }
        let gamma = &ortho.gamma;
        let zeta_coeffs = match self {
            Self::AnalyticL2(_) => {
                let b = DVector::from_iterator(m, kept.iter().map(|&i| self.inner_vectors(truth, &rb[i]).unwrap()));
                gamma * b
            }
            Self::GalerkinCd(g) => {
                let a = g.operator(mu.coords());
                let av: Vec<Vec<f64>> = kept.iter().map(|&i| a.matvec(&rb[i])).collect();
                let lift = a.matvec(g.lifting());
                let asub = DMatrix::from_fn(m, m, |l, k| dot(&rb[kept[l]], &av[k]));
                let fsub = DVector::from_iterator(m, kept.iter().map(|&i| -dot(&rb[i], &lift)));
                let r = gamma * asub * gamma.transpose();
                let f = gamma * fsub;
                r.lu().solve(&f).ok_or_else(|| Error::SingularReduced { mu: mu.coords().to_vec(), condition: f64::INFINITY })?
            }
        };
        let y = gamma.transpose() * zeta_coeffs;
        for (k, &i) in kept.iter().enumerate() {
            for (a, v) in approx.iter_mut().zip(&rb[i]) {
                *a += y[k] * v;
            }
        }
        Ok((approx, y.iter().copied().collect()))
    }

    /// Short human-readable description, stored in bundles.
    pub fn descriptor(&self) -> String {
        match self {
            Self::AnalyticL2(a) => {
                let c = a.grid().counts();
                format!("analytic family={} grid={}x{} norm={}", a.family().id(), c[0], c[1], a.norm_kind().name())
            }
            Self::GalerkinCd(g) => {
                let c = g.config();
                format!(
                    "galerkin-cd cells={} degree={} norm={} boundary={}",
                    c.cells,
                    c.degree,
                    c.norm.name(),
                    c.boundary.name()
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1() -> ProblemBackend {
        ProblemBackend::AnalyticL2(AnalyticL2::standard(AnalyticFamily::F1))
    }

    #[test]
    fn constant_has_area_norm() {
        let b = f1();
        let ones = vec![1.0; b.truth_len()];
        assert!((b.inner_vectors(&ones, &ones).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn f1_at_origin_is_centered_gaussian() {
        let b = f1();
        let s = b.truth_solve(&ParameterPoint::new(vec![0.0, 0.0])).unwrap();
        let ProblemBackend::AnalyticL2(a) = &b else { unreachable!() };
        for k in [0usize, 37 * 75 + 37, 1000, 5624] {
            let x = a.grid().node(k);
            let expected = (-x[0] * x[0] / 0.01 - x[1] * x[1] / 0.01).exp();
            assert!((s.coeffs[k] - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn own_span_has_zero_error() {
        let b = f1();
        let mu = ParameterPoint::new(vec![0.3, 0.1]);
        let s = b.truth_solve(&mu).unwrap();
        assert!(b.exact_error(&mu, &[s.clone()]).unwrap() < 1e-12);
        let empty = b.exact_error(&mu, &[]).unwrap();
        assert!((empty - b.norm(&s.coeffs)).abs() < 1e-15);
    }

    #[test]
    fn separable_residual_matches_dense() {
        let ProblemBackend::AnalyticL2(a) = f1() else { unreachable!() };
        let t = a.factors(&[0.1, 0.2]);
        let f = a.factors(&[0.12, 0.18]);
        let dense: Vec<f64> = a.expand(&t).iter().zip(a.expand(&f)).map(|(x, y)| x - 0.7 * y).collect();
        let r = a.separable_residual_norm(&t, &[(0.7, &f)]);
        assert!((r - a.norm(&dense)).abs() <= 1e-14);
        let full = a.inner(&a.expand(&t), &a.expand(&f));
        assert!((a.factor_inner(&t, &f) - full).abs() < 1e-13 * full.abs());
    }

    #[test]
    fn analytic_backend_has_no_affine_terms() {
        assert!(matches!(f1().affine_terms(), Err(Error::NotGalerkin)));
    }
}
