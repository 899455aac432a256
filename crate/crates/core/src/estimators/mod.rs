//! Path extraction: successive detection, alternating refinement and joint
//! specular/diffuse estimation.

pub mod clean;
pub mod config;
pub mod dmc;
pub mod engine;
pub mod estimate;
pub mod fisher;
pub mod ls;
pub mod regions;
pub mod rejection;
pub mod rimax;
pub mod sage;
pub mod stopping;
pub mod update;

pub use clean::clean_extract;
pub use config::{DmcSettings, EstimatorConfig};
pub use dmc::{fit_dmc, DmcModel, ToeplitzCovariance};
pub use estimate::{Criterion, EstimateFile, EstimateSet, EstimatedMpc, RejectionRecord, StopReason};
pub use fisher::fisher_relative_variance;
pub use ls::ls_amplitudes;
pub use regions::{find_search_regions, Region};
pub use rejection::{reject_candidate, Decision};
pub use rimax::{rimax_extract, rimax_from};
pub use sage::sage_refine;
pub use stopping::{stopping_check, StopDecision};
pub use update::{single_mpc_update, Candidate};
