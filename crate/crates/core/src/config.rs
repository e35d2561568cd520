//! Trial configuration and cluster data.

use crate::error::{Result, SwdError};

/// Between-cluster to residual variance ratio, stored as `lambda = sigma_e^2 / tau^2`.
///
/// `Independent` is the `rho = 0` limit (`lambda` infinite). It is kept as its own
/// variant so that every cluster weight is exactly zero instead of a ratio of
/// infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceRatio {
    Finite(f64),
    Independent,
}

impl VarianceRatio {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(SwdError::InvalidInput(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(VarianceRatio::Finite(lambda))
    }

    pub fn from_icc(icc: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&icc) || icc.is_nan() {
            return Err(SwdError::InvalidInput(format!(
                "icc must lie in [0, 1], got {icc}"
            )));
        }
        if icc == 0.0 {
            return Ok(VarianceRatio::Independent);
        }
        Ok(VarianceRatio::Finite((1.0 - icc) / icc))
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            VarianceRatio::Finite(l) => Some(l),
            VarianceRatio::Independent => None,
        }
    }

    pub fn icc(&self) -> f64 {
        match *self {
            VarianceRatio::Finite(l) => 1.0 / (1.0 + l),
            VarianceRatio::Independent => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    CrossSectional,
    /// Same individuals measured in every period; `mu = omega^2 / tau^2`.
    ClosedCohort {
        mu: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    periods: usize,
    ratio: VarianceRatio,
    kind: DesignKind,
    sigma_e2: f64,
}

impl TrialConfig {
    pub fn new(periods: usize, ratio: VarianceRatio) -> Result<Self> {
        if periods < 2 {
            return Err(SwdError::InvalidDesign(format!(
                "a stepped wedge needs at least 2 periods, got {periods}"
            )));
        }
        Ok(TrialConfig {
            periods,
            ratio,
            kind: DesignKind::CrossSectional,
            sigma_e2: 1.0,
        })
    }

    /// Cross-sectional design with the given `lambda`.
    pub fn cross_sectional(periods: usize, lambda: f64) -> Result<Self> {
        Self::new(periods, VarianceRatio::from_lambda(lambda)?)
    }

    pub fn from_icc(periods: usize, icc: f64) -> Result<Self> {
        Self::new(periods, VarianceRatio::from_icc(icc)?)
    }

    pub fn with_closed_cohort(mut self, mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(SwdError::InvalidInput(format!(
                "mu must be finite and nonnegative, got {mu}"
            )));
        }
        self.kind = DesignKind::ClosedCohort { mu };
        Ok(self)
    }

    pub fn with_sigma_e2(mut self, sigma_e2: f64) -> Result<Self> {
        if !(sigma_e2.is_finite() && sigma_e2 > 0.0) {
            return Err(SwdError::InvalidInput(format!(
                "sigma_e2 must be positive, got {sigma_e2}"
            )));
        }
        self.sigma_e2 = sigma_e2;
        Ok(self)
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn sequences(&self) -> usize {
        self.periods - 1
    }

    pub fn ratio(&self) -> VarianceRatio {
        self.ratio
    }

    /// `None` in the independent (`rho = 0`) limit.
    pub fn lambda(&self) -> Option<f64> {
        self.ratio.lambda()
    }

    pub fn icc(&self) -> f64 {
        self.ratio.icc()
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    /// Zero for cross-sectional designs.
    pub fn mu(&self) -> f64 {
        match self.kind {
            DesignKind::CrossSectional => 0.0,
            DesignKind::ClosedCohort { mu } => mu,
        }
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }

    /// True when `rho = 1`: cluster effects dominate and only within-cluster
    /// contrasts carry information.
    pub fn is_within_cluster_limit(&self) -> bool {
        self.ratio == VarianceRatio::Finite(0.0)
    }

    /// Per-cluster weight `w_i = (N_i + mu) / (lambda + T (N_i + mu))` from the
    /// closed-form inverse `V_i^{-1} = (N_i / sigma_e^2)(I - w_i J)`.
    pub fn cluster_weight(&self, size: u64) -> f64 {
        let t = self.periods as f64;
        match self.ratio {
            VarianceRatio::Independent => 0.0,
            VarianceRatio::Finite(0.0) => 1.0 / t,
            VarianceRatio::Finite(l) => {
                let m = size as f64 + self.mu();
                m / (l + t * m)
            }
        }
    }

    /// `q_i = p_i w_i` for every cluster.
    pub fn q_weights(&self, clusters: &ClusterSet) -> Vec<f64> {
        clusters
            .sizes()
            .iter()
            .zip(clusters.proportions())
            .map(|(&n, p)| p * self.cluster_weight(n))
            .collect()
    }

    /// `W = sum q_i`.
    pub fn total_weight(&self, clusters: &ClusterSet) -> f64 {
        self.q_weights(clusters).iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    sizes: Vec<u64>,
    total: u64,
}

impl ClusterSet {
    pub fn new(sizes: Vec<u64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(SwdError::InvalidInput(
                "at least one cluster is required".into(),
            ));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(SwdError::InvalidInput(format!(
                "cluster {} has size 0; every cluster needs at least one individual",
                i + 1
            )));
        }
        let total = sizes.iter().sum();
        Ok(ClusterSet { sizes, total })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn proportions(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.sizes.iter().map(|&s| s as f64 / n).collect()
    }

    pub fn mean(&self) -> f64 {
        self.total as f64 / self.sizes.len() as f64
    }

    /// Coefficient of variation using the `C - 1` sample standard deviation;
    /// zero for a single cluster.
    pub fn cv(&self) -> f64 {
        let c = self.sizes.len();
        if c < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.sizes.iter().map(|&s| (s as f64 - m).powi(2)).sum();
        (ss / (c - 1) as f64).sqrt() / m
    }

    pub fn all_equal(&self) -> bool {
        self.sizes.windows(2).all(|w| w[0] == w[1])
    }
}
