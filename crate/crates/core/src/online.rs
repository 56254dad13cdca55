//! Online stage: nearest samples under the learned metric, orthonormalization
//! from Gram data only, and the reduced solve.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::backend::{CoefficientKind, ProblemBackend};
use crate::domain::ParameterPoint;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::metric::distance_raw;
use crate::ortho::{orthonormalize, OrthoCoefficients};
use crate::store::OfflineBundle;

/// Metric distances from `mu` to every sample, given column-major tensors
/// for `mu` and for each sample (`p * p` values per sample).
pub fn sample_distances(mu: &[f64], m_mu: &[f64], samples: &[ParameterPoint], sample_metrics: &[f64]) -> Vec<f64> {
    let p = mu.len();
    let mut scratch = vec![0.0; p];
    samples
        .iter()
        .enumerate()
        .map(|(k, s)| distance_raw(m_mu, mu, &sample_metrics[k * p * p..(k + 1) * p * p], s.coords(), &mut scratch))
        .collect()
}

/// Tensors of `field` at each sample point, concatenated.
pub fn metrics_at(field: &MetricField, samples: &[ParameterPoint]) -> Vec<f64> {
    let p = field.dim();
    let mut out = vec![0.0; samples.len() * p * p];
    for (k, s) in samples.iter().enumerate() {
        field.metric_into(s.coords(), &mut out[k * p * p..(k + 1) * p * p]);
    }
    out
}

/// Sample indices in increasing distance, ties broken by the smaller index.
/// Only a prefix is sorted up front; the rest is sorted on demand.
#[derive(Debug, Clone)]
pub struct NeighborOrder {
    keyed: Vec<(f64, usize)>,
    sorted: usize,
    pos: usize,
}

fn cmp_key(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl NeighborOrder {
    pub fn new(distances: &[f64], prefix: usize) -> Self {
        let mut keyed: Vec<(f64, usize)> = distances.iter().copied().zip(0..).collect();
        let k = prefix.min(keyed.len());
        if k > 0 && k < keyed.len() {
            keyed.select_nth_unstable_by(k - 1, cmp_key);
        }
        keyed[..k].sort_unstable_by(cmp_key);
        Self { keyed, sorted: k, pos: 0 }
    }

    pub fn distance_of_rank(&self, rank: usize) -> f64 {
        self.keyed[rank].0
    }
}

impl Iterator for NeighborOrder {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.pos >= self.keyed.len() {
            return None;
        }
        if self.pos == self.sorted {
            self.keyed[self.sorted..].sort_unstable_by(cmp_key);
            self.sorted = self.keyed.len();
        }
        self.pos += 1;
        Some(self.keyed[self.pos - 1].1)
    }
}

/// The `min(n, K)` nearest samples to `mu` under `field` and the ball radius
/// (distance to the farthest of them).
pub fn local_sample_set(mu: &ParameterPoint, samples: &[ParameterPoint], n: usize, field: &MetricField) -> (Vec<usize>, f64) {
    let p = field.dim();
    let mut m_mu = vec![0.0; p * p];
    field.metric_into(mu.coords(), &mut m_mu);
    let d = sample_distances(mu.coords(), &m_mu, samples, &metrics_at(field, samples));
    nearest(&d, n)
}

/// The `min(n, K)` smallest distances (ties by index) and the largest of them.
pub fn nearest(distances: &[f64], n: usize) -> (Vec<usize>, f64) {
    let order = NeighborOrder::new(distances, n);
    let idx: Vec<usize> = order.take(n).collect();
    let r = idx.last().map_or(0.0, |&i| distances[i]);
    (idx, r)
}

/// Orthonormalizes up to `n` candidates taken in order, dropping any
/// candidate that is numerically dependent on the ones before it and
/// replacing it by the next candidate. Returns the kept indices (in order)
/// and their coefficients.
pub fn select_local_basis<G, I>(gram: G, candidates: I, n: usize) -> Result<(Vec<usize>, OrthoCoefficients)>
where
    G: Fn(usize, usize) -> f64,
    I: IntoIterator<Item = usize>,
{
    let mut candidates = candidates.into_iter();
    let mut kept: Vec<usize> = candidates.by_ref().take(n).collect();
    loop {
        let sub = DMatrix::from_fn(kept.len(), kept.len(), |i, j| gram(kept[i], kept[j]));
        match orthonormalize(&sub) {
            Ok(o) => return Ok((kept, o)),
            Err(Error::LinearDependence { index, .. }) => {
                kept.remove(index);
                if let Some(next) = candidates.next() {
                    kept.push(next);
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Affine blocks restricted to the sample set: `a[q][(i, j)] = a_q(v_j, v_i)`,
/// `f[q][i] = f_q(v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAffine {
    pub kind: CoefficientKind,
    pub a: Vec<DMatrix<f64>>,
    pub f: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl ReducedSystem {
    pub fn solve(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let singular = || {
            let sv = self.matrix.singular_values();
            let (hi, lo) = (sv.max(), sv.min());
            Error::SingularReduced { mu: mu.to_vec(), condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } }
        };
        let x = self.matrix.clone().lu().solve(&self.rhs).ok_or_else(singular)?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(singular())
        }
    }
}

/// `sum_q g_q(mu) gamma A^q_sub gamma^T` and `sum_q h_q(mu) gamma f^q_sub`.
pub fn assemble_reduced(affine: &ReducedAffine, local: &[usize], gamma: &DMatrix<f64>, mu: &[f64]) -> ReducedSystem {
    let n = local.len();
    let g = affine.kind.theta_a(mu);
    let h = affine.kind.theta_f(mu);
    let mut sum = DMatrix::zeros(n, n);
    for (q, a) in affine.a.iter().enumerate() {
        for j in 0..n {
            for i in 0..n {
                sum[(i, j)] += g[q] * a[(local[i], local[j])];
            }
        }
    }
    let mut rhs = DVector::zeros(n);
    for (q, f) in affine.f.iter().enumerate() {
        for i in 0..n {
            rhs[i] += h[q] * f[local[i]];
        }
    }
    ReducedSystem { matrix: gamma * sum * gamma.transpose(), rhs: gamma * rhs }
}

/// Wall-clock seconds spent in each online stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub search: f64,
    pub orthonormalize: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    pub mu: ParameterPoint,
    /// Sample indices of the local space, by increasing distance.
    pub local: Vec<usize>,
    pub radius: f64,
    pub gamma: DMatrix<f64>,
    /// Coefficients in the orthonormal basis.
    pub coeffs: DVector<f64>,
    pub timings: StageTimings,
}

impl ReducedSolution {
    /// Coefficients with respect to the local snapshots themselves.
    pub fn snapshot_coeffs(&self) -> DVector<f64> {
        self.gamma.transpose() * &self.coeffs
    }
}

/// Reduced approximation at `mu` from the `n` nearest samples of `bundle`.
///
/// Galerkin bundles are solved from the stored affine blocks alone. Bundles
/// without affine blocks are projection models and need `truth` to form the
/// projection coefficients.
pub fn online_solve(bundle: &OfflineBundle, mu: &ParameterPoint, n: usize, truth: Option<&ProblemBackend>) -> Result<ReducedSolution> {
    if !bundle.domain.contains(mu.coords()) {
        return Err(Error::OutsideDomain { point: mu.coords().to_vec() });
    }
    if n == 0 {
        return Err(Error::Config("local space size must be at least 1".into()));
    }
    if bundle.len() == 0 {
        return Err(Error::Config("bundle holds no samples".into()));
    }
    let t0 = Instant::now();
    let p = bundle.domain.dim();
    let mut m_mu = vec![0.0; p * p];
    bundle.field.metric_into(mu.coords(), &mut m_mu);
    let dist = sample_distances(mu.coords(), &m_mu, &bundle.points, &bundle.sample_metrics);
    let order = NeighborOrder::new(&dist, n + 2);
    let t1 = Instant::now();
    let (local, ortho) = select_local_basis(|i, j| bundle.gram[(i, j)], order, n)?;
    let radius = local.last().map_or(0.0, |&i| dist[i]);
    let t2 = Instant::now();
    let coeffs = match (&bundle.affine, truth) {
        (Some(affine), _) => assemble_reduced(affine, &local, &ortho.gamma, mu.coords()).solve(mu.coords())?,
        (None, Some(backend)) => {
            let snaps = bundle.snapshots.as_ref().ok_or(Error::SnapshotsUnavailable)?;
            let v = backend.truth_solve(mu)?;
            let mut b = DVector::zeros(local.len());
            for (k, &i) in local.iter().enumerate() {
                b[k] = backend.inner_vectors(&v.coeffs, &snaps[i])?;
            }
            &ortho.gamma * b
        }
        (None, None) => {
            return Err(Error::Config("projection bundles need the truth backend online".into()));
        }
    };
    let t3 = Instant::now();
    Ok(ReducedSolution {
        mu: mu.clone(),
        local,
        radius,
        gamma: ortho.gamma,
        coeffs,
        timings: StageTimings {
            search: (t1 - t0).as_secs_f64(),
            orthonormalize: (t2 - t1).as_secs_f64(),
            solve: (t3 - t2).as_secs_f64(),
        },
    })
}

/// Truth-space vector of a reduced solution. Needs stored snapshots.
pub fn reconstruct(bundle: &OfflineBundle, backend: &ProblemBackend, sol: &ReducedSolution) -> Result<Vec<f64>> {
    let snaps = bundle.snapshots.as_ref().ok_or(Error::SnapshotsUnavailable)?;
    let y = sol.snapshot_coeffs();
    let mut u = match backend {
        ProblemBackend::AnalyticL2(_) => vec![0.0; backend.truth_len()],
        ProblemBackend::GalerkinCd(g) => g.lifting().to_vec(),
    };
    for (k, &i) in sol.local.iter().enumerate() {
        let v = backend.reduced_space_vector(&snaps[i]);
        for (a, b) in u.iter_mut().zip(&v) {
            *a += y[k] * b;
        }
    }
    Ok(u)
}

/// Exact error of a reduced solution against a fresh truth solve.
pub fn validation_error(bundle: &OfflineBundle, backend: &ProblemBackend, sol: &ReducedSolution) -> Result<f64> {
    let u = reconstruct(bundle, backend, sol)?;
    let truth = backend.truth_solve(&sol.mu)?;
    let diff: Vec<f64> = truth.coeffs.iter().zip(&u).map(|(a, b)| a - b).collect();
    Ok(backend.norm(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn nearest_by_distance_then_index() {
        let (idx, r) = nearest(&[0.3, 0.1, 0.5, 0.2, 0.4], 3);
        assert_eq!(idx, vec![1, 3, 0]);
        assert_eq!(r, 0.3);
        let (idx, _) = nearest(&[1.0, 0.0, 1.0, 1.0], 3);
        assert_eq!(idx, vec![1, 0, 2]);
        let (idx, r) = nearest(&[0.2, 0.1], 5);
        assert_eq!(idx, vec![1, 0]);
        assert_eq!(r, 0.2);
    }

    #[test]
    fn points_on_a_line() {
        let samples: Vec<ParameterPoint> = (0..10).map(|i| ParameterPoint::new(vec![i as f64])).collect();
        let field = MetricField::identity(ParameterPoint::new(vec![0.0]));
        let (idx, r) = local_sample_set(&ParameterPoint::new(vec![4.2]), &samples, 3, &field);
        assert_eq!(idx, vec![4, 5, 3]);
        assert!((r - 1.2).abs() < 1e-12);
    }

    #[test]
    fn neighbor_order_extends_past_prefix() {
        let d = [5.0, 4.0, 3.0, 2.0, 1.0, 0.0];
        let all: Vec<usize> = NeighborOrder::new(&d, 2).collect();
        assert_eq!(all, vec![5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn dependent_candidate_is_replaced() {
        // candidates 0 and 1 are identical vectors
        let g = dmatrix![1.0, 1.0, 0.0; 1.0, 1.0, 0.0; 0.0, 0.0, 2.0];
        let (kept, o) = select_local_basis(|i, j| g[(i, j)], 0..3, 2).unwrap();
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(o.len(), 2);
    }

    #[test]
    fn gram_as_operator_gives_identity() {
        let g = dmatrix![2.0, 0.5, 0.1; 0.5, 1.0, 0.2; 0.1, 0.2, 3.0];
        let o = orthonormalize(&g).unwrap();
        let affine = ReducedAffine {
            kind: CoefficientKind::ConvectionDiffusion,
            a: vec![g.clone(), DMatrix::zeros(3, 3), DMatrix::zeros(3, 3)],
            f: vec![DVector::zeros(3); 3],
        };
        // g_1 = 10^0 = 1, g_2 = sin 0 = 0, the third block is zero
        let sys = assemble_reduced(&affine, &[0, 1, 2], &o.gamma, &[0.0, 0.0]);
        assert!((sys.matrix - DMatrix::identity(3, 3)).amax() < 1e-14);
    }
}
