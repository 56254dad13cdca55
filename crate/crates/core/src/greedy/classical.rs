use crate::backend::ProblemBackend;
use crate::domain::ParameterPoint;
use crate::error::{Error, Result};
use crate::greedy::samples::{LocalSpace, SampleSet, TrainTruth};
use crate::greedy::TrainingSet;

#[derive(Debug, Clone)]
pub struct ClassicalOutcome {
    pub samples: SampleSet,
    /// Maximum training error before each selection after the first, and
    /// the final one.
    pub max_errors: Vec<f64>,
    pub eta_evals: u64,
}

/// Training point closest to the domain centroid, or a seeded random pick.
pub(crate) fn seed_index(train: &TrainingSet, centroid: &ParameterPoint, seed: Option<u64>) -> usize {
    match seed {
        Some(s) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
            rng.random_range(0..train.len())
        }
        None => {
            let mut best = (f64::INFINITY, 0);
            for (i, p) in train.points.iter().enumerate() {
                let d = p.euclidean_distance(centroid);
                if d < best.0 {
                    best = (d, i);
                }
            }
            best.1
        }
    }
}

/// Standard greedy over one global space: repeatedly adds the training
/// point with the largest error until `count` samples exist or the maximum
/// error drops to `tol`.
pub fn classical_greedy(
    backend: &ProblemBackend,
    train: &TrainingSet,
    count: usize,
    tol: f64,
    seed: Option<u64>,
) -> Result<ClassicalOutcome> {
    if count == 0 {
        return Err(Error::Config("the greedy needs at least one sample".into()));
    }
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let truth = TrainTruth::prepare(backend, &train.points)?;
    let p = train.points[0].dim();
    let centroid = ParameterPoint::new(
        (0..p)
            .map(|i| {
                let (lo, hi) = train.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q[i]), b.max(q[i])));
                0.5 * (lo + hi)
            })
            .collect(),
    );
    bootstrap(backend, train, &truth, count, tol, seed_index(train, &centroid, seed))
}

pub(crate) fn bootstrap(
    backend: &ProblemBackend,
    train: &TrainingSet,
    truth: &TrainTruth,
    count: usize,
    tol: f64,
    first: usize,
) -> Result<ClassicalOutcome> {
    let mut samples = SampleSet::new();
    samples.push(backend, train.points[first].clone())?;
    let mut max_errors = Vec::new();
    let mut eta_evals = 0u64;
    while samples.len() < count {
        let space = LocalSpace::global(&samples)?;
        let mut best: Option<(f64, usize)> = None;
        let mut max_err = 0.0f64;
        for (t, mu) in train.points.iter().enumerate() {
            let e = space.error(backend, &samples, truth, t, mu.coords())?;
            eta_evals += 1;
            max_err = max_err.max(e);
            if samples.contains(mu) {
                continue;
            }
            if best.is_none_or(|(b, _)| e > b) {
                best = Some((e, t));
            }
        }
        max_errors.push(max_err);
        match best {
            Some((e, t)) if e > tol => {
                samples.push(backend, train.points[t].clone())?;
            }
            _ => break,
        }
    }
    Ok(ClassicalOutcome { samples, max_errors, eta_evals })
}
