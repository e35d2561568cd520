//! Closed-cohort designs. The same individuals are followed in every period,
//! which adds `mu = omega^2 / tau^2` to each cluster size inside the weights.
//! Everything downstream of the weights is unchanged.

use crate::allocation::Allocation;
use crate::approx::{fit_regression, RegressionFit};
use crate::config::{ClusterSet, DesignKind, TrialConfig};
use crate::error::{Result, SwdError};
use crate::exact::{exact_precision_scalar, PrecisionReport};

#[derive(Debug, Clone, PartialEq)]
pub struct CohortWeights {
    pub mu: f64,
    /// `p_i (N_i + mu) / (lambda + T (N_i + mu))`.
    pub q_tilde: Vec<f64>,
    pub w_tilde: f64,
    pub beta_tilde: f64,
    pub fit: RegressionFit,
}

fn require_cohort(config: &TrialConfig) -> Result<f64> {
    match config.kind() {
        DesignKind::ClosedCohort { mu } => Ok(mu),
        DesignKind::CrossSectional => Err(SwdError::InvalidDesign(
            "closed-cohort weights need a closed-cohort configuration".into(),
        )),
    }
}

pub fn cohort_weights(config: &TrialConfig, clusters: &ClusterSet) -> Result<CohortWeights> {
    let mu = require_cohort(config)?;
    let q_tilde = config.q_weights(clusters);
    let fit = fit_regression(config, clusters);
    Ok(CohortWeights {
        mu,
        w_tilde: fit.w,
        beta_tilde: fit.beta,
        q_tilde,
        fit,
    })
}

pub fn cohort_exact_precision(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<PrecisionReport> {
    require_cohort(config)?;
    exact_precision_scalar(config, clusters, alloc)
}
