//! Gram-Schmidt orthonormalization of a local snapshot set carried out purely
//! on precomputed inner products.
//!
//! For an ordered local set `v_1, ..., v_N` with Gram matrix `G_ij = <v_j, v_i>`
//! the recursion produces `beta` (the Gram-Schmidt coefficients of
//! `zeta_n = beta_nn v_n + sum_{j<n} beta_nj zeta_j`), the workspace
//! `beta_tilde_kn = -<v_k, zeta_n>`, and finally the lower-triangular change of
//! basis `gamma` with `zeta_n = sum_i gamma_ni v_i`. No operation touches the
//! truth-space vectors themselves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold on `alpha^2 / G_nn` below which snapshot `n` is
/// treated as linearly dependent on its predecessors.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaCoefficients {
    pub beta: DMatrix<f64>,
    pub beta_tilde: DMatrix<f64>,
    /// Scalar multiply-adds performed.
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoCoefficients {
    pub beta: DMatrix<f64>,
    pub beta_tilde: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub flops: u64,
}

impl OrthoCoefficients {
    pub fn len(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.nrows() == 0
    }
}

/// Runs the `beta` recursion on a symmetric Gram matrix.
pub fn compute_beta(gram: &DMatrix<f64>) -> Result<BetaCoefficients> {
    let n = gram.nrows();
    assert!(gram.is_square());
    let mut beta = DMatrix::zeros(n, n);
    // beta_tilde[(k, j)] = -<v_k, zeta_j>, only k > j is ever read
    let mut bt = DMatrix::zeros(n, n);
    let mut flops = 0u64;
    for m in 0..n {
        let gmm = gram[(m, m)];
        if !(gmm > 0.0) {
            return Err(Error::LinearDependence { index: m, alpha_sq: gmm });
        }
        let mut s = 0.0;
        for j in 0..m {
            s += bt[(m, j)] * bt[(m, j)];
        }
        flops += m as u64;
        let alpha_sq = gmm - s;
        if !(alpha_sq > DEPENDENCE_TOLERANCE * gmm) {
            return Err(Error::LinearDependence { index: m, alpha_sq });
        }
        let alpha = alpha_sq.sqrt();
        beta[(m, m)] = 1.0 / alpha;
        for j in 0..m {
            beta[(m, j)] = bt[(m, j)] / alpha;
        }
        flops += m as u64;
        for k in (m + 1)..n {
            let mut acc = -beta[(m, m)] * gram[(m, k)];
            for j in 0..m {
                acc += beta[(m, j)] * bt[(k, j)];
            }
            bt[(k, m)] = acc;
            flops += m as u64 + 1;
        }
    }
    Ok(BetaCoefficients { beta, beta_tilde: bt, flops })
}

/// Lower-triangular change of basis from the `beta` coefficients:
/// `gamma_ni = sum_{k<n} beta_nk gamma_ki` for `i < n`, `gamma_nn = beta_nn`.
pub fn compute_gamma(beta: &DMatrix<f64>) -> (DMatrix<f64>, u64) {
    let n = beta.nrows();
    let mut gamma = DMatrix::zeros(n, n);
    let mut flops = 0u64;
    for m in 0..n {
        gamma[(m, m)] = beta[(m, m)];
        for i in 0..m {
            let mut acc = 0.0;
            // gamma_ki vanishes for k < i
            for k in i..m {
                acc += beta[(m, k)] * gamma[(k, i)];
            }
            gamma[(m, i)] = acc;
            flops += (m - i) as u64;
        }
    }
    (gamma, flops)
}

/// `compute_beta` followed by `compute_gamma`.
pub fn orthonormalize(gram: &DMatrix<f64>) -> Result<OrthoCoefficients> {
    let b = compute_beta(gram)?;
    let (gamma, gflops) = compute_gamma(&b.beta);
    Ok(OrthoCoefficients { beta: b.beta, beta_tilde: b.beta_tilde, gamma, flops: b.flops + gflops })
}

/// `gamma G gamma^T`, the Gram matrix of the orthonormalized basis.
pub fn transformed_gram(gamma: &DMatrix<f64>, gram: &DMatrix<f64>) -> DMatrix<f64> {
    gamma * gram * gamma.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_case() {
        let o = orthonormalize(&dmatrix![4.0]).unwrap();
        assert_eq!(o.beta[(0, 0)], 0.5);
        assert_eq!(o.gamma[(0, 0)], 0.5);
    }

    #[test]
    fn identity_is_fixed_point() {
        let g = DMatrix::<f64>::identity(5, 5);
        let o = orthonormalize(&g).unwrap();
        assert_eq!(o.beta, g);
        assert_eq!(o.gamma, g);
        for k in 0..5 {
            for j in 0..k {
                assert_eq!(o.beta_tilde[(k, j)], 0.0);
            }
        }
    }

    #[test]
    fn gamma_of_identity_beta() {
        let (g, _) = compute_gamma(&DMatrix::identity(4, 4));
        assert_eq!(g, DMatrix::identity(4, 4));
    }

    #[test]
    fn two_by_two_by_hand() {
        // v1 = (1, 0), v2 = (1, 1): zeta1 = v1, zeta2 = v2 - v1
        let g = dmatrix![1.0, 1.0; 1.0, 2.0];
        let o = orthonormalize(&g).unwrap();
        assert!((o.gamma - dmatrix![1.0, 0.0; -1.0, 1.0]).amax() < 1e-15);
    }

    #[test]
    fn dependent_snapshot_reported() {
        let g = dmatrix![1.0, 1.0, 0.0; 1.0, 1.0, 0.0; 0.0, 0.0, 1.0];
        match orthonormalize(&g) {
            Err(Error::LinearDependence { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected dependence, got {other:?}"),
        }
    }

    #[test]
    fn flop_count_is_cubic() {
        for n in [5usize, 10, 20] {
            let g = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 1.0 / (1.0 + (i + j) as f64) });
            let o = orthonormalize(&g).unwrap();
            assert!(o.flops <= 6 * (n as u64).pow(3));
            assert!(o.flops >= (n as u64).pow(3) / 6);
        }
    }
}
