use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the parameter domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("finite-difference increment must be strictly positive (direction {direction})")]
    ZeroIncrement { direction: usize },

    #[error("metric field has no nodes")]
    EmptyField,

    #[error("negative quadratic form {value:e} under the distance root; metric tensor is not semi-definite")]
    NonPsdMetric { value: f64 },

    #[error("linear dependence detected at local index {index} (alpha^2 = {alpha_sq:e})")]
    LinearDependence { index: usize, alpha_sq: f64 },

    #[error("singular truth operator at mu = {mu:?}")]
    SingularTruth { mu: Vec<f64> },

    #[error("singular reduced system at mu = {mu:?} (condition estimate {condition:e})")]
    SingularReduced { mu: Vec<f64>, condition: f64 },

    #[error("operation requires a Galerkin backend")]
    NotGalerkin,

    #[error("unknown analytic family `{0}`")]
    UnknownFamily(String),

    #[error("snapshots unavailable in this bundle")]
    SnapshotsUnavailable,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training set size {requested} is below the {corners} box corners")]
    TrainingTooSmall { requested: usize, corners: usize },

    #[error("offline stage did not converge: {0}")]
    NonConvergence(String),

    #[error("bundle format error: {0}")]
    Format(String),

    #[error("bundle invariant violated: {0}")]
    Invariant(String),

    #[error("refusing to overwrite {0} (use force)")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
