//! Precision of the treatment effect in stepped wedge trials with unequal
//! cluster sizes: exact and approximate variances, optimal individual
//! allocations, and search over cluster-to-sequence allocations.

pub mod allocation;
pub mod approx;
pub mod cohort;
pub mod config;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod moments;
pub mod optimal;
pub mod search;

pub use allocation::{derive_profile, Allocation, AllocationProfile, CanonicalAllocation};
pub use approx::{
    approximation_error, fit_regression, precision_approx, precision_pq, ApproxConstants,
    ApproxModel, ApproxTerms, RegressionFit,
};
pub use cohort::{cohort_exact_precision, cohort_weights, CohortWeights};
pub use config::{ClusterSet, DesignKind, TrialConfig, VarianceRatio};
pub use error::{Result, SwdError};
pub use exact::{exact_precision_matrix, exact_precision_scalar, PrecisionReport};
pub use geometry::{build_geometry, SequenceGeometry};
pub use moments::{
    approx_w, approx_w_beta, moment_summary, ExpansionOrder, MomentSummary, SizeMoments,
};
pub use optimal::{optimal_p, optimal_value_formula, OptimalDesign};
pub use search::{
    enumerate, evaluate_allocation, metrics, recommend, sample, AllocationMetrics,
    ExtraClusterRule, RankedAllocation, Recommendation, RecommendationAudit, SearchMode,
    SearchScheme,
};
