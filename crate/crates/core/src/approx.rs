//! Regression elimination of `Q` and the approximate precision `V(P, K)`.
//!
//! The per-cluster weights `q_i` are regressed on `W p_i`:
//! `q_i = alpha + beta W p_i + r_i`. Summed over a sequence this gives
//! `Q = W (1 - beta) K + beta W P + R`, and dropping `R` turns the exact
//! precision into a function of `P` and `K` alone:
//!
//! `V(P, K) = P^T A P + h1 b z^T P - h2 b^2 - W (1 - beta) a`.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::allocation::{check_len, derive_profile, Allocation, AllocationProfile};
use crate::config::{ClusterSet, TrialConfig, VarianceRatio};
use crate::error::{Result, SwdError};
use crate::exact::exact_precision_scalar;
use crate::geometry::{build_geometry, dot, quad_form, SequenceGeometry};

/// Correlation below which the linear `q`-`p` relationship is reported as weak.
pub const LOW_CORRELATION_WARNING: f64 = 0.99;

/// Below this variance of `p_i` all clusters are treated as equal-sized.
const EQUAL_SIZE_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub w: f64,
    pub beta: f64,
    pub alpha: f64,
    /// `r_i` per cluster, in cluster order.
    pub residuals: Vec<f64>,
    /// Correlation of `q_i` with `p_i`.
    pub corr: f64,
}

impl RegressionFit {
    pub fn w_beta(&self) -> f64 {
        self.w * self.beta
    }

    pub fn is_low_correlation(&self) -> bool {
        self.corr < LOW_CORRELATION_WARNING
    }
}

/// Least-squares slope and correlation of `ys` on `xs`.
fn slope_and_corr(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let corr = if syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        1.0
    };
    (sxy / sxx, corr)
}

/// Ordinary least squares of `q_i` on `W p_i` with intercept.
///
/// Equal cluster sizes give `beta = 1` and zero residuals (`Q = W P` exactly).
/// At `rho = 1` the weights are exactly `p_i / T`, so the same holds with
/// `W = 1/T`. At `rho = 0` every `q_i` vanishes; `beta` is then the limiting
/// slope of `p_i^2` on `(sum p^2) p_i`, which only ever appears multiplied by `W = 0`.
pub fn fit_regression(config: &TrialConfig, clusters: &ClusterSet) -> RegressionFit {
    let c = clusters.len();
    let p = clusters.proportions();
    let pbar = 1.0 / c as f64;
    let var_p = p.iter().map(|x| (x - pbar).powi(2)).sum::<f64>() / c as f64;

    if config.is_within_cluster_limit() {
        let w = 1.0 / config.periods() as f64;
        return RegressionFit {
            w,
            beta: 1.0,
            alpha: 0.0,
            residuals: vec![0.0; c],
            corr: 1.0,
        };
    }
    if config.ratio() == VarianceRatio::Independent {
        let (beta, corr) = if var_p < EQUAL_SIZE_VARIANCE {
            (1.0, 1.0)
        } else {
            let sq: Vec<f64> = p.iter().map(|x| x * x).collect();
            let s2: f64 = sq.iter().sum();
            let xs: Vec<f64> = p.iter().map(|x| s2 * x).collect();
            slope_and_corr(&xs, &sq)
        };
        return RegressionFit {
            w: 0.0,
            beta,
            alpha: 0.0,
            residuals: vec![0.0; c],
            corr,
        };
    }

    let q = config.q_weights(clusters);
    let w: f64 = q.iter().sum();
    if var_p < EQUAL_SIZE_VARIANCE {
        return RegressionFit {
            w,
            beta: 1.0,
            alpha: 0.0,
            residuals: vec![0.0; c],
            corr: 1.0,
        };
    }
    let xs: Vec<f64> = p.iter().map(|x| w * x).collect();
    let (beta, corr) = slope_and_corr(&xs, &q);
    let alpha = w * (1.0 - beta) / c as f64;
    let residuals = q
        .iter()
        .zip(&xs)
        .map(|(qi, xi)| qi - alpha - beta * xi)
        .collect();
    if corr < LOW_CORRELATION_WARNING {
        warn!(
            "correlation of q_i with p_i is {corr:.4}; the regression approximation may be inaccurate"
        );
    }
    RegressionFit {
        w,
        beta,
        alpha,
        residuals,
        corr,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxConstants {
    pub w: f64,
    pub beta: f64,
    pub periods: usize,
    pub h1: f64,
    pub h2: f64,
    pub gamma: f64,
    pub h3: f64,
    /// `A = Xi - beta W Lambda + gamma W Delta`.
    pub a_matrix: DMatrix<f64>,
}

impl ApproxConstants {
    /// `h1`, `h2` and `gamma` carry a factor `(beta - 1)` over `1 - W T`; they
    /// are written in that factored form so `beta = 1` gives `h1 = h2 = 0`,
    /// `gamma = 1` even when `W T = 1`.
    pub fn new(fit: &RegressionFit, geometry: &SequenceGeometry) -> Result<Self> {
        let s = geometry.sequences();
        let periods = s + 1;
        let t = periods as f64;
        let (w, beta) = (fit.w, fit.beta);
        let wt = w * t;
        let (h1, h2, gamma) = if beta == 1.0 {
            (0.0, 0.0, 1.0)
        } else {
            let denom = 1.0 - wt;
            if denom <= 0.0 {
                return Err(SwdError::DegenerateVariance { wt });
            }
            (
                2.0 * w * (1.0 - beta) * (1.0 - beta * wt) / denom,
                (1.0 - beta).powi(2) * w * w * t / denom,
                1.0 + (beta - 1.0) * (2.0 - (beta + 1.0) * wt) / denom,
            )
        };
        let outer_gap = 1.0 - gamma * w * (s as f64 - 1.0);
        let h3 = h2 - h1 * h1 * (s as f64 - 1.0) / (4.0 * outer_gap);
        let a_matrix = DMatrix::from_fn(s, s, |i, j| {
            geometry.xi[(i, j)] - beta * w * geometry.lambda[(i, j)]
                + gamma * w * geometry.delta[(i, j)]
        });
        Ok(ApproxConstants {
            w,
            beta,
            periods,
            h1,
            h2,
            gamma,
            h3,
            a_matrix,
        })
    }

    pub fn sequences(&self) -> usize {
        self.periods - 1
    }

    /// `1 - gamma W (S - 1)`, positive for every valid design.
    pub fn outer_gap(&self) -> f64 {
        1.0 - self.gamma * self.w * (self.sequences() as f64 - 1.0)
    }

    /// Coefficient of `a = K^T y`; positive when `beta > 1`.
    pub fn outer_loading_coefficient(&self) -> f64 {
        -self.w * (1.0 - self.beta)
    }
}

/// The four additive terms of `V(P, K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxTerms {
    /// `P^T A P`
    pub quadratic: f64,
    /// `h1 b z^T P`
    pub linear: f64,
    /// `-h2 b^2`
    pub imbalance_penalty: f64,
    /// `-W (1 - beta) a`
    pub outer_loading: f64,
}

impl ApproxTerms {
    pub fn total(&self) -> f64 {
        self.quadratic + self.linear + self.imbalance_penalty + self.outer_loading
    }
}

/// Approximate precision from the individual and cluster proportions.
pub fn precision_approx(
    p: &DVector<f64>,
    k: &DVector<f64>,
    constants: &ApproxConstants,
    geometry: &SequenceGeometry,
) -> ApproxTerms {
    let b = dot(k, &geometry.z);
    let a = dot(k, &geometry.y);
    let zp = dot(&geometry.z, p);
    ApproxTerms {
        quadratic: quad_form(p, &constants.a_matrix, p),
        linear: constants.h1 * b * zp,
        imbalance_penalty: -constants.h2 * b * b,
        outer_loading: constants.outer_loading_coefficient() * a,
    }
}

/// Exact precision written through the sequence profile:
/// `P^T Xi P - Q^T Lambda~ P - (T Q^T Delta Q + W P^T Delta P - 2 Q^T Delta P) / (1 - W T)`.
pub fn precision_pq(profile: &AllocationProfile, geometry: &SequenceGeometry) -> Result<f64> {
    let t = (geometry.sequences() + 1) as f64;
    let w = profile.w;
    let denom = 1.0 - w * t;
    if denom <= 0.0 {
        return Err(SwdError::DegenerateVariance { wt: w * t });
    }
    let (p, q) = (&profile.p, &profile.q);
    let delta = &geometry.delta;
    Ok(quad_form(p, &geometry.xi, p)
        - quad_form(q, &geometry.lambda_tilde, p)
        - (t * quad_form(q, delta, q) + w * quad_form(p, delta, p) - 2.0 * quad_form(q, delta, p))
            / denom)
}

/// Per-sequence sums of regression residuals.
pub fn residual_profile(fit: &RegressionFit, alloc: &Allocation, sequences: usize) -> DVector<f64> {
    let mut r = DVector::zeros(sequences);
    for (&l, ri) in alloc.assignment().iter().zip(&fit.residuals) {
        r[l - 1] += ri;
    }
    r
}

/// Exact precision after substituting `Q = W(1-beta) K + beta W P + R`, with
/// the `R` terms kept. Dropping them (`R = 0`) gives [`precision_approx`]; with
/// the actual residuals it reproduces [`precision_pq`].
pub fn precision_with_residuals(
    p: &DVector<f64>,
    k: &DVector<f64>,
    r: &DVector<f64>,
    fit: &RegressionFit,
    geometry: &SequenceGeometry,
) -> Result<f64> {
    let t = (geometry.sequences() + 1) as f64;
    let (w, beta) = (fit.w, fit.beta);
    let denom = 1.0 - w * t;
    if denom <= 0.0 {
        return Err(SwdError::DegenerateVariance { wt: w * t });
    }
    let (y, z) = (&geometry.y, &geometry.z);
    let b = dot(k, z);
    let a = dot(k, y);
    let x = dot(z, p);
    let u = w * (1.0 - beta) * b + w * beta * x + dot(z, r);
    Ok(quad_form(p, &geometry.xi, p)
        - (dot(y, r) + w * (1.0 - beta) * a + w * beta * dot(y, p))
        - (t * u * u + w * x * x - 2.0 * u * x) / denom)
}

/// Geometry, regression fit and constants for one `(config, clusters)` pair.
#[derive(Debug, Clone)]
pub struct ApproxModel {
    pub geometry: SequenceGeometry,
    pub fit: RegressionFit,
    pub constants: ApproxConstants,
}

impl ApproxModel {
    pub fn new(config: &TrialConfig, clusters: &ClusterSet) -> Result<Self> {
        let geometry = build_geometry(config.sequences())?;
        let fit = fit_regression(config, clusters);
        let constants = ApproxConstants::new(&fit, &geometry)?;
        Ok(ApproxModel {
            geometry,
            fit,
            constants,
        })
    }

    pub fn evaluate(&self, profile: &AllocationProfile) -> ApproxTerms {
        precision_approx(&profile.p, &profile.k, &self.constants, &self.geometry)
    }
}

/// `|V - V_exact| / V_exact` for an estimable allocation.
pub fn approximation_error(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<f64> {
    check_len(alloc, clusters)?;
    let exact = exact_precision_scalar(config, clusters, alloc)?;
    if !exact.estimable {
        let canon = alloc.canonical(clusters, config.sequences())?;
        return Err(SwdError::NonEstimable(canon.to_string()));
    }
    let model = ApproxModel::new(config, clusters)?;
    let profile = derive_profile(config, clusters, alloc)?;
    let v = model.evaluate(&profile).total();
    Ok((v - exact.v_exact).abs() / exact.v_exact)
}
