//! Angle-delay matched-filter kernel shared by all estimators.

pub mod grid;
pub mod kernel;
pub mod metric;
pub mod transform;

pub use grid::{DelaySpec, Evaluator, GridValues, SearchGrid};
pub use kernel::{Kron, ModelVector, Mu, SounderModel};
pub use metric::Metric;
