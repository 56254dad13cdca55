//! The complete offline stage.

use std::collections::BTreeMap;

use crate::backend::ProblemBackend;
use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{Error, Result};
use crate::field::{FieldNode, Interpolation, MetricField};
use crate::greedy::classical::{bootstrap, seed_index};
use crate::greedy::enrich::{enrichment_loop, GreedyState};
use crate::greedy::samples::{LocalSpace, SampleSet, TrainTruth};
use crate::greedy::training::{generate_training_set, q_of_err};
use crate::greedy::{IterationRecord, TrainingSet};
use crate::metric::{default_increments, estimate_hessian, metric_from_hessian, MetricTensor};
use crate::online::{metrics_at, sample_distances, NeighborOrder};
use crate::store::OfflineBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Tensor lattice with `n` nodes per direction, fixed for the whole run.
    Fixed { n: usize },
    /// Regenerated every iteration with a size between the two bounds.
    Adaptive { q_min: usize, q_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// Metric learned from Hessians of the reduced coefficients.
    Anisotropic,
    /// Identity metric everywhere.
    Isotropic,
}

impl MetricMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Anisotropic => "anisotropic",
            Self::Isotropic => "isotropic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "anisotropic" | "aniso" => Some(Self::Anisotropic),
            "isotropic" | "iso" => Some(Self::Isotropic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OfflineConfig {
    pub domain: ParameterDomain,
    pub n_local: usize,
    pub tol: f64,
    pub training: TrainingMode,
    pub metric: MetricMode,
    /// Finite-difference increments; defaults to a thousandth of each extent.
    pub delta: Option<Vec<f64>>,
    /// Seeds training-set generation and, with `random_start`, the first sample.
    pub seed: u64,
    /// Draw the first sample at random instead of next to the centroid.
    pub random_start: bool,
    /// Abort once the sample count exceeds this.
    pub max_samples: usize,
    /// Abort after this many consecutive outer iterations whose maximum
    /// error repeats the previous one to within a relative 1e-12.
    pub stagnation_window: usize,
    pub interpolation: Interpolation,
    pub keep_snapshots: bool,
    /// Stored verbatim in the bundle.
    pub problem: BTreeMap<String, String>,
}

impl OfflineConfig {
    pub fn new(domain: ParameterDomain, n_local: usize, tol: f64) -> Self {
        Self {
            domain,
            n_local,
            tol,
            training: TrainingMode::Fixed { n: 75 },
            metric: MetricMode::Anisotropic,
            delta: None,
            seed: 0,
            random_start: false,
            max_samples: 5000,
            stagnation_window: 3,
            interpolation: Interpolation::Auto,
            keep_snapshots: true,
            problem: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_local == 0 {
            return bad("local space size must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance {} must lie in (0, 1)", self.tol));
        }
        match self.training {
            TrainingMode::Fixed { n } if n < 2 => return bad(format!("lattice needs at least 2 nodes per direction, got {n}")),
            TrainingMode::Adaptive { q_min, q_max } => {
                if q_min > q_max {
                    return bad(format!("q_min {q_min} exceeds q_max {q_max}"));
                }
                if q_min < self.n_local + 1 {
                    return bad(format!("q_min {q_min} is below the {} bootstrap samples", self.n_local + 1));
                }
                let corners = 1usize << self.domain.dim();
                if q_min < corners {
                    return Err(Error::TrainingTooSmall { requested: q_min, corners });
                }
            }
            _ => {}
        }
        if let Some(d) = &self.delta {
            if d.len() != self.domain.dim() {
                return Err(Error::DimensionMismatch { expected: self.domain.dim(), got: d.len() });
            }
        }
        if self.max_samples <= self.n_local {
            return bad(format!("sample cap {} must exceed N = {}", self.max_samples, self.n_local));
        }
        if self.stagnation_window == 0 {
            return bad("stagnation window must be positive".into());
        }
        Ok(())
    }
}

/// Diagnostics of an offline run beyond what the bundle stores.
#[derive(Debug, Clone)]
pub struct OfflineReport {
    pub history: Vec<IterationRecord>,
    pub bootstrap_evals: u64,
    /// Error evaluations in the outer loop only.
    pub stage2_evals: u64,
    pub outer_iterations: usize,
    /// Final training set with its verified errors.
    pub train: TrainingSet,
    pub errors: Vec<f64>,
    /// Radius and tensor per final training point under the bundle field.
    pub radii: Vec<f64>,
    pub tensors: Vec<MetricTensor>,
}

impl OfflineReport {
    pub fn total_evals(&self) -> u64 {
        self.bootstrap_evals + self.stage2_evals
    }

    pub fn final_max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    pub bundle: OfflineBundle,
    pub report: OfflineReport,
}

/// Classical bootstrap to `N + 1` samples, then outer iterations of error
/// sweep, metric update, enrichment and (adaptive mode) training-set
/// regeneration until every training error is at most `tol`.
pub fn offline_drive(backend: &ProblemBackend, config: &OfflineConfig) -> Result<OfflineOutcome> {
    offline_drive_observed(backend, config, |_| {})
}

/// [`offline_drive`] calling `progress` with every history row as it is
/// recorded.
pub fn offline_drive_observed<F>(backend: &ProblemBackend, config: &OfflineConfig, mut progress: F) -> Result<OfflineOutcome>
where
    F: FnMut(&IterationRecord),
{
    config.validate()?;
    let domain = &config.domain;
    let p = domain.dim();
    let n = config.n_local;
    let delta = config.delta.clone().unwrap_or_else(|| default_increments(domain));
    let seed = config.seed;

    let identity = || MetricField::identity(domain.centroid());
    let mut train = match config.training {
        TrainingMode::Fixed { n } => TrainingSet::lattice(domain, n),
        TrainingMode::Adaptive { q_min, .. } => generate_training_set(&identity(), q_min, domain, seed)?,
    };
    let mut truth = TrainTruth::prepare(backend, &train.points)?;

    let first = seed_index(&train, &domain.centroid(), config.random_start.then_some(seed));
    let boot = bootstrap(backend, &train, &truth, n + 1, config.tol, first)?;
    let mut history = vec![IterationRecord {
        iteration: 0,
        samples: boot.samples.len(),
        max_err: boot.max_errors.last().copied().unwrap_or(f64::NAN),
        eta_evals: boot.eta_evals,
        train_size: train.len(),
    }];
    progress(&history[0]);
    let bootstrap_evals = boot.eta_evals;
    let mut samples = boot.samples;
    let mut field = identity();
    let mut stage2_evals = 0u64;
    let mut previous = f64::NAN;
    let mut stale = 0usize;

    for iteration in 1.. {
        // (a) errors under the current field
        let sweep = error_sweep(backend, &samples, &train, &truth, &field, n)?;
        let max_err = sweep.errors.iter().copied().fold(0.0, f64::max);
        stage2_evals += train.len() as u64;
        history.push(IterationRecord {
            iteration,
            samples: samples.len(),
            max_err,
            eta_evals: train.len() as u64,
            train_size: train.len(),
        });
        progress(history.last().expect("just pushed"));
        if max_err <= config.tol {
            let (radii, tensors) = radii_under(&field, &samples, &train, n);
            let report = OfflineReport {
                history: history.clone(),
                bootstrap_evals,
                stage2_evals,
                outer_iterations: iteration,
                train,
                errors: sweep.errors,
                radii,
                tensors: tensors.chunks(p * p).map(|m| MetricTensor::from_psd_unchecked(nalgebra::DMatrix::from_column_slice(p, p, m))).collect(),
            };
            let snapshots = config.keep_snapshots.then(|| samples.snapshots(backend));
            let mut bundle = OfflineBundle::new(
                config.problem.clone(),
                domain.clone(),
                n,
                config.tol,
                samples.points().to_vec(),
                snapshots,
                samples.gram_matrix(),
                samples.reduced_affine(backend),
                field,
            )?;
            bundle.history = history;
            bundle.meta = run_meta(config, &report);
            return Ok(OfflineOutcome { bundle, report });
        }
        if samples.len() > config.max_samples {
            return Err(Error::NonConvergence(format!(
                "sample count {} exceeds the cap {} (max error {max_err:e} after {iteration} iterations)",
                samples.len(),
                config.max_samples
            )));
        }
        // The maximum error of the local greedy is not monotone, so only a
        // value that stops moving altogether counts as stagnation.
        if (max_err - previous).abs() <= 1e-12 * previous {
            stale += 1;
            if stale >= config.stagnation_window {
                return Err(Error::NonConvergence(format!(
                    "max error stuck at {max_err:e} for {stale} iterations (K = {})",
                    samples.len()
                )));
            }
        } else {
            stale = 0;
        }
        previous = max_err;

        // (b) metric at the training points
        let tensors: Vec<MetricTensor> = match config.metric {
            MetricMode::Anisotropic => {
                let mut out = Vec::with_capacity(train.len());
                for (t, mu) in train.points.iter().enumerate() {
                    let space = &sweep.spaces[t];
                    let h = estimate_hessian(
                        |x: &ParameterPoint| Ok(space.coefficients(backend, &samples, x.coords())?.as_slice().to_vec()),
                        mu,
                        &delta,
                        domain,
                    )?;
                    out.push(metric_from_hessian(&h));
                }
                out
            }
            MetricMode::Isotropic => vec![MetricTensor::identity(p); train.len()],
        };
        let nodes: Vec<FieldNode> = train
            .points
            .iter()
            .zip(tensors)
            .map(|(pt, tensor)| FieldNode { point: pt.clone(), tensor, radius: 0.0 })
            .collect();
        let unsized_field = MetricField::new(nodes, config.interpolation)?;
        let (radii, flat) = radii_under(&unsized_field, &samples, &train, n);
        let next_field = MetricField::new(
            unsized_field
                .nodes()
                .iter()
                .zip(&radii)
                .map(|(nd, &r)| FieldNode { point: nd.point.clone(), tensor: nd.tensor.clone(), radius: r })
                .collect(),
            config.interpolation,
        )?;

        // (c) enrichment with the frozen errors
        let mut state = GreedyState {
            samples,
            train,
            field: next_field,
            errors: sweep.errors,
            radii,
            tensors: flat,
            err: max_err,
            iteration,
            eta_evals: stage2_evals,
            n_local: n,
            tol: config.tol,
        };
        let added = enrichment_loop(&mut state, backend)?;
        if added.is_empty() {
            return Err(Error::NonConvergence(format!(
                "no admissible training point above tolerance (max error {max_err:e}, K = {})",
                state.samples.len()
            )));
        }
        samples = state.samples;
        train = state.train;
        field = state.field;

        // (d) regenerate the training set
        if let TrainingMode::Adaptive { q_min, q_max } = config.training {
            let q = q_of_err(max_err, config.tol, q_min, q_max)?;
            let generation = train.generation + 1;
            train = generate_training_set(&field, q, domain, seed.wrapping_add(generation as u64))?;
            train.generation = generation;
            truth = TrainTruth::prepare(backend, &train.points)?;
        }
    }
    unreachable!("the outer loop only exits by returning")
}

struct Sweep {
    errors: Vec<f64>,
    spaces: Vec<LocalSpace>,
}

fn error_sweep(
    backend: &ProblemBackend,
    samples: &SampleSet,
    train: &TrainingSet,
    truth: &TrainTruth,
    field: &MetricField,
    n: usize,
) -> Result<Sweep> {
    let p = field.dim();
    let sample_m = metrics_at(field, samples.points());
    let mut m = vec![0.0; p * p];
    let mut errors = Vec::with_capacity(train.len());
    let mut spaces = Vec::with_capacity(train.len());
    for (t, mu) in train.points.iter().enumerate() {
        field.metric_into(mu.coords(), &mut m);
        let d = sample_distances(mu.coords(), &m, samples.points(), &sample_m);
        let space = LocalSpace::nearest(samples, &d, n)?;
        errors.push(space.error(backend, samples, truth, t, mu.coords())?);
        spaces.push(space);
    }
    Ok(Sweep { errors, spaces })
}

/// Ball radius (distance to the `N`-th nearest sample) and tensor of `field`
/// at every training point.
fn radii_under(field: &MetricField, samples: &SampleSet, train: &TrainingSet, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = field.dim();
    let pp = p * p;
    let sample_m = metrics_at(field, samples.points());
    let mut tensors = vec![0.0; train.len() * pp];
    let mut radii = Vec::with_capacity(train.len());
    let rank = n.min(samples.len()) - 1;
    for (mu, m) in train.points.iter().zip(tensors.chunks_mut(pp)) {
        field.metric_into(mu.coords(), m);
        let d = sample_distances(mu.coords(), m, samples.points(), &sample_m);
        radii.push(NeighborOrder::new(&d, rank + 1).distance_of_rank(rank));
    }
    (radii, tensors)
}

fn run_meta(config: &OfflineConfig, report: &OfflineReport) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert("metric_mode".into(), config.metric.name().into());
    let training = match config.training {
        TrainingMode::Fixed { n } => format!("fixed:{n}"),
        TrainingMode::Adaptive { q_min, q_max } => format!("adaptive:{q_min}:{q_max}"),
    };
    meta.insert("training".into(), training);
    meta.insert("seed".into(), config.seed.to_string());
    meta.insert("random_start".into(), config.random_start.to_string());
    meta.insert("bootstrap_evals".into(), report.bootstrap_evals.to_string());
    meta.insert("stage2_evals".into(), report.stage2_evals.to_string());
    meta.insert("outer_iterations".into(), report.outer_iterations.to_string());
    meta.insert("final_train_size".into(), report.train.len().to_string());
    meta
}
