//! Fixtures shared by the benchmarks.

use anisorb::config::RunConfig;
use anisorb::greedy::offline_drive;
use anisorb::{OfflineBundle, ParameterPoint};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bundle of a reduced convection-diffusion run, small enough to build in
/// a few seconds.
pub fn galerkin_bundle() -> OfflineBundle {
    let mut cfg = RunConfig::preset("test4").expect("preset exists");
    for kv in ["problem.cells=24", "train.n=15", "greedy.n=10", "greedy.tol=1e-3"] {
        cfg.set_pair(kv).expect("valid override");
    }
    let backend = cfg.build_backend().expect("valid backend");
    offline_drive(&backend, &cfg.offline_config().expect("valid config")).expect("run converges").bundle
}

/// `count` uniform points in `[-1, 1]^2`.
pub fn random_points(count: usize, seed: u64) -> Vec<ParameterPoint> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| ParameterPoint::new(vec![2.0 * r.random::<f64>() - 1.0, 2.0 * r.random::<f64>() - 1.0])).collect()
}

/// Well-conditioned SPD Gram matrix of size `n`.
pub fn gram(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
    &b * b.transpose() + DMatrix::identity(n, n)
}
