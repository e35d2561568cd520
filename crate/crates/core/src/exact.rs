//! Exact GLS precision of the treatment effect, by two independent routes.
//!
//! * [`exact_precision_scalar`] works cluster by cluster with the scalar sums
//!   `E`, `F`, `G`, `H`.
//! * [`exact_precision_matrix`] assembles the `(T+1) x (T+1)` information matrix
//!   from the closed-form `V_i^{-1}` and inverts it.
//!
//! Both report `v = N^{-1} sigma_e^2 var(theta_hat)^{-1}`.

use nalgebra::{DMatrix, DVector};

use crate::allocation::{check_len, Allocation};
use crate::config::{ClusterSet, TrialConfig, VarianceRatio};
use crate::error::{Result, SwdError};

/// Information per individual at or below this is treated as zero.
pub const ESTIMABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionReport {
    /// `N^{-1} sigma_e^2 var(theta_hat)^{-1}`; scale free.
    pub v_exact: f64,
    /// `var(theta_hat)` including the configured `sigma_e^2`; infinite when not estimable.
    pub var_theta: f64,
    pub estimable: bool,
}

impl PrecisionReport {
    fn from_information(config: &TrialConfig, total: u64, info: f64) -> Self {
        let n = total as f64;
        let v = info / n;
        let estimable = v > ESTIMABILITY_TOL;
        PrecisionReport {
            v_exact: v,
            var_theta: if estimable {
                config.sigma_e2() / info
            } else {
                f64::INFINITY
            },
            estimable,
        }
    }
}

/// The cluster sums from the partitioned-inverse derivation, with `r_i` the
/// number of intervention periods of cluster `i`:
/// `E = sum N_i r_i`, `F = sum N_i w_i r_i`, `G = |sum N_i D_i|^2`,
/// `H = sum N_i w_i r_i^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSums {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub w: f64,
}

impl ClusterSums {
    pub fn new(config: &TrialConfig, clusters: &ClusterSet, alloc: &Allocation) -> Result<Self> {
        check_len(alloc, clusters)?;
        let t = config.periods();
        let mut treated = vec![0.0; t];
        let (mut e, mut f, mut h, mut w) = (0.0, 0.0, 0.0, 0.0);
        for (size, l) in alloc.members(clusters) {
            let n = size as f64;
            let r = l as f64;
            let wi = config.cluster_weight(size);
            e += n * r;
            f += n * wi * r;
            h += n * wi * r * r;
            w += n * wi;
            for cell in &mut treated[t - l..] {
                *cell += n;
            }
        }
        let g = treated.iter().map(|u| u * u).sum();
        Ok(ClusterSums {
            e,
            f,
            g,
            h,
            w: w / clusters.total() as f64,
        })
    }

    /// `sigma_e^2 var(theta_hat)^{-1} = E - H - G/N - (T F^2 + W E^2 - 2 E F) / (N (1 - W T))`.
    ///
    /// Direct evaluation; loses digits as `W T -> 1`. [`exact_precision_scalar`]
    /// uses an equivalent rearrangement that stays accurate there.
    pub fn information(&self, periods: usize, total: u64) -> Result<f64> {
        let t = periods as f64;
        let n = total as f64;
        let denom = 1.0 - self.w * t;
        if denom <= 0.0 {
            return Err(SwdError::DegenerateVariance { wt: self.w * t });
        }
        Ok(self.e
            - self.h
            - self.g / n
            - (t * self.f * self.f + self.w * self.e * self.e - 2.0 * self.e * self.f)
                / (n * denom))
    }
}

/// Scalar route.
///
/// Writes `w_i = 1/T - d_i` with `d_i = lambda / (T (lambda + T m_i))`,
/// `m_i = N_i + mu`. Substituting into the `E, F, G, H` expression gives
///
/// `E - sum N_i r_i^2 / T - G/N + E^2/(N T) + sum N_i d_i (r_i - rbar)^2`
///
/// where `rbar` is the `N_i d_i`-weighted mean of `r_i`. The last sum vanishes
/// in the `rho = 1` limit, which the direct form can only reach as `0/0`.
pub fn exact_precision_scalar(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<PrecisionReport> {
    check_len(alloc, clusters)?;
    let t = config.periods();
    let tf = t as f64;
    let n = clusters.total() as f64;
    let mu = config.mu();

    let shortfall = |size: u64| -> f64 {
        match config.ratio() {
            VarianceRatio::Independent => 1.0 / tf,
            VarianceRatio::Finite(l) => l / (tf * (l + tf * (size as f64 + mu))),
        }
    };

    let mut treated = vec![0.0; t];
    let (mut e, mut r2, mut dw, mut dr) = (0.0, 0.0, 0.0, 0.0);
    let mut weighted = Vec::with_capacity(clusters.len());
    for (size, l) in alloc.members(clusters) {
        let ni = size as f64;
        let r = l as f64;
        let d = ni * shortfall(size);
        e += ni * r;
        r2 += ni * r * r;
        dw += d;
        dr += d * r;
        weighted.push((d, r));
        for cell in &mut treated[t - l..] {
            *cell += ni;
        }
    }
    let g: f64 = treated.iter().map(|u| u * u).sum();
    let between = if dw > 0.0 {
        let rbar = dr / dw;
        weighted.iter().map(|(d, r)| d * (r - rbar).powi(2)).sum()
    } else {
        0.0
    };
    let info = e - r2 / tf - g / n + e * e / (n * tf) + between;
    Ok(PrecisionReport::from_information(
        config,
        clusters.total(),
        info,
    ))
}

/// Treatment indicator of sequence `l`: 1 in the last `l` of `t` periods.
pub fn treatment_indicator(t: usize, l: usize) -> DVector<f64> {
    DVector::from_fn(t, |j, _| if j >= t - l { 1.0 } else { 0.0 })
}

/// The `(T+1) x (T+1)` matrix `Z^T V^{-1} Z` (period effects first, treatment last).
pub fn information_matrix(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<DMatrix<f64>> {
    check_len(alloc, clusters)?;
    let t = config.periods();
    let s2 = config.sigma_e2();
    let mut info = DMatrix::zeros(t + 1, t + 1);
    for (size, l) in alloc.members(clusters) {
        let w = config.cluster_weight(size);
        let scale = size as f64 / s2;
        let v_inv = DMatrix::from_fn(t, t, |i, j| scale * (if i == j { 1.0 } else { 0.0 } - w));
        let d = treatment_indicator(t, l);
        let vd = &v_inv * &d;
        let mut block = info.view_mut((0, 0), (t, t));
        block += &v_inv;
        for j in 0..t {
            info[(j, t)] += vd[j];
            info[(t, j)] += vd[j];
        }
        info[(t, t)] += d.dot(&vd);
    }
    Ok(info)
}

/// Matrix route. Inverts the full information matrix; in the `rho = 1` limit
/// the period block is singular and a pseudo-inverse is used, with
/// estimability checked by whether the treatment direction lies in its range.
pub fn exact_precision_matrix(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<PrecisionReport> {
    let m = information_matrix(config, clusters, alloc)?;
    let t = config.periods();
    let s2 = config.sigma_e2();
    let non_estimable = PrecisionReport {
        v_exact: 0.0,
        var_theta: f64::INFINITY,
        estimable: false,
    };
    let var = if config.is_within_cluster_limit() {
        let eps = 1e-10 * m.norm();
        let pinv = match m.clone().pseudo_inverse(eps) {
            Ok(p) => p,
            Err(_) => return Ok(non_estimable),
        };
        let mut unit = DVector::zeros(t + 1);
        unit[t] = 1.0;
        let projected = &m * (&pinv * &unit);
        if (projected - &unit).norm() > 1e-8 {
            return Ok(non_estimable);
        }
        pinv[(t, t)]
    } else {
        match m.try_inverse() {
            Some(inv) => inv[(t, t)],
            None => return Ok(non_estimable),
        }
    };
    if !var.is_finite() || var <= 0.0 {
        return Ok(non_estimable);
    }
    Ok(PrecisionReport::from_information(
        config,
        clusters.total(),
        s2 / var,
    ))
}

/// Whether the treatment effect has finite variance after adjusting for periods.
pub fn estimability(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<bool> {
    Ok(exact_precision_scalar(config, clusters, alloc)?.estimable)
}
