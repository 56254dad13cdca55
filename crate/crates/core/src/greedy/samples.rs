//! Growing sample set `S_K` with the offline data derived from it, and the
//! local approximations built on top of it.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::backend::{ProblemBackend, Separable};
use crate::domain::ParameterPoint;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::online::{select_local_basis, NeighborOrder, ReducedAffine, ReducedSystem};
use crate::ortho::OrthoCoefficients;

/// Ordered sample points with their snapshots, Gram matrix and (for
/// Galerkin problems) the affine blocks restricted to the snapshots.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    points: Vec<ParameterPoint>,
    keys: HashSet<Vec<u64>>,
    // approximation-space vectors (the homogeneous part for Galerkin)
    vectors: Vec<Vec<f64>>,
    factors: Vec<Separable>,
    gram: Vec<Vec<f64>>,
    // a[q][i][j] = a_q(v_j, v_i), f[q][i] = f_q(v_i)
    a: Vec<Vec<Vec<f64>>>,
    f: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn contains(&self, mu: &ParameterPoint) -> bool {
        self.keys.contains(&mu.key())
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i][j]
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| self.gram[i][j])
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// Full truth vectors of all samples.
    pub fn snapshots(&self, backend: &ProblemBackend) -> Vec<Vec<f64>> {
        match backend {
            ProblemBackend::AnalyticL2(_) => self.vectors.clone(),
            ProblemBackend::GalerkinCd(g) => self
                .vectors
                .iter()
                .map(|v| v.iter().zip(g.lifting()).map(|(a, b)| a + b).collect())
                .collect(),
        }
    }

    pub fn reduced_affine(&self, backend: &ProblemBackend) -> Option<ReducedAffine> {
        let forms = backend.affine_terms().ok()?;
        let k = self.len();
        Some(ReducedAffine {
            kind: forms.kind,
            a: self.a.iter().map(|rows| DMatrix::from_fn(k, k, |i, j| rows[i][j])).collect(),
            f: self.f.iter().map(|v| DVector::from_column_slice(v)).collect(),
        })
    }

    /// Computes the snapshot at `mu` and appends it. Returns its index.
    pub fn push(&mut self, backend: &ProblemBackend, mu: ParameterPoint) -> Result<usize> {
        if self.contains(&mu) {
            return Err(Error::Invariant(format!("sample {:?} selected twice", mu.coords())));
        }
        let k = self.len();
        let (vector, factor) = match backend {
            ProblemBackend::AnalyticL2(a) => {
                let f = a.factors(mu.coords());
                (a.expand(&f), Some(f))
            }
            ProblemBackend::GalerkinCd(g) => (g.solve_homogeneous(mu.coords())?, None),
        };
        let mut row = Vec::with_capacity(k + 1);
        match (backend, &factor) {
            (ProblemBackend::AnalyticL2(a), Some(fac)) => {
                for other in &self.factors {
                    row.push(a.factor_inner(other, fac));
                }
                row.push(a.factor_inner(fac, fac));
            }
            (ProblemBackend::GalerkinCd(g), _) => {
                let mv = g.inner_matrix().matvec(&vector);
                for other in &self.vectors {
                    row.push(dot(other, &mv));
                }
                row.push(dot(&vector, &mv));
            }
            _ => unreachable!(),
        }
        if !(row[k] > 0.0) {
            return Err(Error::Invariant(format!("snapshot at {:?} has zero norm", mu.coords())));
        }
        for (i, r) in self.gram.iter_mut().enumerate() {
            r.push(row[i]);
        }
        self.gram.push(row);

        if let Ok(forms) = backend.affine_terms() {
            if self.a.is_empty() {
                self.a = vec![Vec::new(); forms.q_a()];
                self.f = vec![Vec::new(); forms.q_f()];
            }
            for (q, op) in forms.operators.iter().enumerate() {
                let av = op.matvec(&vector);
                let atv = op.matvec_transpose(&vector);
                let rows = &mut self.a[q];
                // column k: a_q(v_k, v_i) = v_i . A v_k ; row k: a_q(v_j, v_k) = v_k . A v_j = (A^T v_k) . v_j
                for (i, r) in rows.iter_mut().enumerate() {
                    r.push(dot(&self.vectors[i], &av));
                }
                let mut new_row: Vec<f64> = self.vectors.iter().map(|v| dot(&atv, v)).collect();
                new_row.push(dot(&vector, &av));
                rows.push(new_row);
            }
            for (q, fv) in forms.functionals.iter().enumerate() {
                self.f[q].push(dot(fv, &vector));
            }
        }
        self.keys.insert(mu.key());
        self.points.push(mu);
        self.vectors.push(vector);
        if let Some(f) = factor {
            self.factors.push(f);
        }
        Ok(k)
    }

    fn reduced_system(&self, kind: crate::backend::CoefficientKind, local: &[usize], gamma: &DMatrix<f64>, mu: &[f64]) -> ReducedSystem {
        let n = local.len();
        let g = kind.theta_a(mu);
        let h = kind.theta_f(mu);
        let mut sum = DMatrix::zeros(n, n);
        for (q, rows) in self.a.iter().enumerate() {
            for j in 0..n {
                for i in 0..n {
                    sum[(i, j)] += g[q] * rows[local[i]][local[j]];
                }
            }
        }
        let mut rhs = DVector::zeros(n);
        for (q, fv) in self.f.iter().enumerate() {
            for i in 0..n {
                rhs[i] += h[q] * fv[local[i]];
            }
        }
        ReducedSystem { matrix: gamma * sum * gamma.transpose(), rhs: gamma * rhs }
    }
}

/// Truth data of a training set, prepared once per set.
#[derive(Debug, Clone)]
pub enum TrainTruth {
    Analytic(Vec<Separable>),
    /// Homogeneous truth vectors.
    Galerkin(Vec<Vec<f64>>),
}

impl TrainTruth {
    pub fn prepare(backend: &ProblemBackend, points: &[ParameterPoint]) -> Result<Self> {
        Ok(match backend {
            ProblemBackend::AnalyticL2(a) => Self::Analytic(points.iter().map(|p| a.factors(p.coords())).collect()),
            ProblemBackend::GalerkinCd(g) => {
                Self::Galerkin(points.iter().map(|p| g.solve_homogeneous(p.coords())).collect::<Result<_>>()?)
            }
        })
    }

    /// Number of truth solves performed to prepare the set.
    pub fn solves(&self) -> usize {
        match self {
            Self::Analytic(v) => v.len(),
            Self::Galerkin(v) => v.len(),
        }
    }
}

/// A local space `W_mu`: kept sample indices (by increasing distance) and
/// their orthonormalization.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub kept: Vec<usize>,
    pub ortho: OrthoCoefficients,
}

impl LocalSpace {
    /// Orthonormalizes up to `n` samples drawn from `order`.
    pub fn build<I: IntoIterator<Item = usize>>(samples: &SampleSet, order: I, n: usize) -> Result<Self> {
        let (kept, ortho) = select_local_basis(|i, j| samples.gram(i, j), order, n)?;
        Ok(Self { kept, ortho })
    }

    /// All samples in insertion order (the global space of the classical greedy).
    pub fn global(samples: &SampleSet) -> Result<Self> {
        Self::build(samples, 0..samples.len(), samples.len())
    }

    pub fn nearest(samples: &SampleSet, distances: &[f64], n: usize) -> Result<Self> {
        Self::build(samples, NeighborOrder::new(distances, n + 2), n)
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Coefficients of the reduced approximation at `mu` in the orthonormal
    /// basis of this space.
    pub fn coefficients(&self, backend: &ProblemBackend, samples: &SampleSet, mu: &[f64]) -> Result<DVector<f64>> {
        let m = self.len();
        match backend {
            ProblemBackend::AnalyticL2(a) => {
                let f = a.factors(mu);
                Ok(self.projection_coefficients(a, samples, &f))
            }
            ProblemBackend::GalerkinCd(g) => {
                if m == 0 {
                    return Ok(DVector::zeros(0));
                }
                samples.reduced_system(g.forms().kind, &self.kept, &self.ortho.gamma, mu).solve(mu)
            }
        }
    }

    fn projection_coefficients(&self, a: &crate::backend::AnalyticL2, samples: &SampleSet, f: &Separable) -> DVector<f64> {
        let b = DVector::from_iterator(self.len(), self.kept.iter().map(|&i| a.factor_inner(&samples.factors[i], f)));
        &self.ortho.gamma * b
    }

    /// Exact error of the local approximation at training point `t`.
    pub fn error(&self, backend: &ProblemBackend, samples: &SampleSet, truth: &TrainTruth, t: usize, mu: &[f64]) -> Result<f64> {
        match (backend, truth) {
            (ProblemBackend::AnalyticL2(a), TrainTruth::Analytic(fs)) => {
                let c = self.projection_coefficients(a, samples, &fs[t]);
                let y = self.ortho.gamma.tr_mul(&c);
                let terms: Vec<(f64, &Separable)> = self.kept.iter().enumerate().map(|(k, &i)| (y[k], &samples.factors[i])).collect();
                Ok(a.separable_residual_norm(&fs[t], &terms))
            }
            (ProblemBackend::GalerkinCd(g), TrainTruth::Galerkin(us)) => {
                let mut e = us[t].clone();
                if !self.is_empty() {
                    let c = self.coefficients(backend, samples, mu)?;
                    let y = self.ortho.gamma.tr_mul(&c);
                    for (k, &i) in self.kept.iter().enumerate() {
                        for (x, v) in e.iter_mut().zip(&samples.vectors[i]) {
                            *x -= y[k] * v;
                        }
                    }
                }
                Ok(g.norm(&e))
            }
            _ => Err(Error::Invariant("training truth does not match the backend".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{AnalyticFamily, AnalyticL2};

    #[test]
    fn gram_rows_are_symmetric_and_positive() {
        let backend = ProblemBackend::AnalyticL2(AnalyticL2::standard(AnalyticFamily::F1));
        let mut s = SampleSet::new();
        for c in [[0.0, 0.0], [0.1, -0.2], [0.3, 0.3]] {
            s.push(&backend, ParameterPoint::new(c.to_vec())).unwrap();
        }
        let g = s.gram_matrix();
        assert_eq!(g, g.transpose());
        assert!(g.diagonal().iter().all(|&d| d > 0.0));
        assert!(s.push(&backend, ParameterPoint::new(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn sample_error_vanishes_in_own_space() {
        let backend = ProblemBackend::AnalyticL2(AnalyticL2::standard(AnalyticFamily::F3));
        let mut s = SampleSet::new();
        let pts: Vec<ParameterPoint> = [[0.0, 0.1], [0.2, -0.1]].iter().map(|c| ParameterPoint::new(c.to_vec())).collect();
        for p in &pts {
            s.push(&backend, p.clone()).unwrap();
        }
        let truth = TrainTruth::prepare(&backend, &pts).unwrap();
        let space = LocalSpace::global(&s).unwrap();
        for t in 0..2 {
            assert!(space.error(&backend, &s, &truth, t, pts[t].coords()).unwrap() < 1e-12);
        }
    }
}
