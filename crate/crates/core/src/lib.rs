//! Locally adaptive reduced-basis approximation with learned anisotropic
//! parameter metrics.
//!
//! The offline stage ([`greedy::offline_drive`]) selects snapshots with a
//! greedy that works on local spaces: at every parameter only the `N`
//! nearest snapshots, measured with a metric learned from Hessians of the
//! reduced coefficients, span the approximation. The online stage
//! ([`online::online_solve`]) needs only the bundle written by
//! [`store::save_bundle`].

pub mod backend;
pub mod config;
pub mod domain;
pub mod error;
pub mod field;
pub mod greedy;
pub mod linalg;
pub mod metric;
pub mod online;
pub mod ortho;
pub mod report;
pub mod store;

pub use domain::{ParameterDomain, ParameterPoint};
pub use error::{Error, Result};
pub use field::{FieldNode, Interpolation, MetricField};
pub use metric::{HessianMatrix, MetricTensor};
pub use store::OfflineBundle;
