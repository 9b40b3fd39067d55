//! Lp-norm sample-query structures and the sampling subroutines built on
//! them: importance-sampling inner products, rejection sampling from linear
//! combinations, and direct fidelity estimation with L1 Pauli sampling.

pub mod dfe;
pub mod error;
pub mod estimators;
pub mod lincomb;
pub mod matrix;
pub mod ptree;
pub mod query;
pub mod randkit;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{estimate_inner_product, estimate_trace_inner_product, EstimateReport, MedianOfMeans};
pub use lincomb::{exact_m, sample_from_combination, CombinationSampler, IterationCap, RejectionSampleResult};
pub use matrix::DenseMatrix;
pub use ptree::{WeightedMatrixTree, WeightedVectorTree};
pub use query::{FnQuery, QueryAccess};
pub use randkit::{stream, DistributionSpec, MomentMethod, MomentProfile, Stream};
