//! Scoring of estimates against ground truth (association and error
//! statistics) and against the measurement itself (NMSE).

pub mod assign;
pub mod cost;
pub mod nmse;
pub mod report;

pub use assign::{associate, associate_empirical, empirical_sigmas, hungarian, match_pairs, nearest_pairs, AssociationResult, Pair, DEFAULT_C_UM};
pub use cost::{geodesic, pairwise_cost, unit_direction, PairCost, Sigmas};
pub use nmse::{as_estimates, nmse, nmse_of_k, reconstruct};
pub use report::{error_report, percentile, scatter_svg, ErrorReport, ErrorSummary, PairError, Percentiles};
