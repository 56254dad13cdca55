//! Offline stage: classical greedy bootstrap, locally adaptive enrichment,
//! metric learning and training-set regeneration.

mod classical;
mod drive;
mod enrich;
mod samples;
mod training;

pub use classical::{classical_greedy, ClassicalOutcome};
pub use drive::{offline_drive, offline_drive_observed, MetricMode, OfflineConfig, OfflineOutcome, OfflineReport, TrainingMode};
pub use enrich::{domain_of_influence_excludes, enrichment_loop, select_enrichment, GreedyState};
pub use samples::{LocalSpace, SampleSet, TrainTruth};
pub use training::{generate_training_set, q_of_err};

use crate::domain::{ParameterDomain, ParameterPoint};

/// Finite surrogate `Xi_train` of the parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub points: Vec<ParameterPoint>,
    /// Number of regenerations that produced this set.
    pub generation: usize,
}

impl TrainingSet {
    /// Tensor lattice with `n` nodes per direction (corners included).
    pub fn lattice(domain: &ParameterDomain, n: usize) -> Self {
        Self { points: domain.lattice(n), generation: 0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 0 for the bootstrap, then one per outer iteration.
    pub iteration: usize,
    /// Sample count `K` when the errors were evaluated.
    pub samples: usize,
    pub max_err: f64,
    /// Error evaluations spent in this iteration.
    pub eta_evals: u64,
    pub train_size: usize,
}
