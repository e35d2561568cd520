//! Test-only oracles that share no code with the library's variance formulas.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Variance components for simulating individual observations.
#[derive(Debug, Clone, Copy)]
pub struct Components {
    pub tau2: f64,
    pub sigma_e2: f64,
    /// Within-individual variance; zero for cross-sectional designs.
    pub omega2: f64,
}

/// Coefficients `g` with `theta_hat = g^T ybar`, where `ybar` stacks the
/// cluster-period means cluster by cluster. Built from an explicitly inverted
/// covariance matrix.
pub fn gls_theta_weights(
    sizes: &[u64],
    seqs: &[usize],
    periods: usize,
    comp: Components,
) -> DVector<f64> {
    let c = sizes.len();
    let rows = c * periods;
    let mut x = DMatrix::zeros(rows, periods + 1);
    let mut vinv = DMatrix::zeros(rows, rows);
    for i in 0..c {
        let n = sizes[i] as f64;
        let mut v = DMatrix::from_element(periods, periods, comp.tau2 + comp.omega2 / n);
        for j in 0..periods {
            v[(j, j)] += comp.sigma_e2 / n;
            let r = i * periods + j;
            x[(r, j)] = 1.0;
            // sequence l switches to treatment for the last l periods
            x[(r, periods)] = if j + seqs[i] >= periods { 1.0 } else { 0.0 };
        }
        let inv = v
            .try_inverse()
            .expect("cluster covariance is positive definite");
        vinv.view_mut((i * periods, i * periods), (periods, periods))
            .copy_from(&inv);
    }
    let xt_vinv = x.transpose() * &vinv;
    let info = &xt_vinv * &x;
    let cov = info.try_inverse().expect("estimable design");
    let g = cov.row(periods) * xt_vinv;
    g.transpose()
}

/// Analytic `var(theta_hat)` for the same construction.
pub fn gls_variance(sizes: &[u64], seqs: &[usize], periods: usize, comp: Components) -> f64 {
    let g = gls_theta_weights(sizes, seqs, periods, comp);
    let c = sizes.len();
    let mut var = 0.0;
    for i in 0..c {
        let n = sizes[i] as f64;
        for j in 0..periods {
            for k in 0..periods {
                let mut cov = comp.tau2 + comp.omega2 / n;
                if j == k {
                    cov += comp.sigma_e2 / n;
                }
                var += g[i * periods + j] * g[i * periods + k] * cov;
            }
        }
    }
    var
}

pub struct MonteCarlo {
    pub mean: f64,
    pub variance: f64,
    pub reps: usize,
}

impl MonteCarlo {
    /// Standard error of the sample variance under normality.
    pub fn variance_se(&self, true_var: f64) -> f64 {
        true_var * (2.0 / (self.reps as f64 - 1.0)).sqrt()
    }
}

/// Simulates every individual: cluster effect, individual effect carried over
/// periods (closed cohort) and fresh residual noise; then applies the GLS weights
/// to the cluster-period means. The true treatment effect is 1 and the period effects are `0..T`.
pub fn simulate(
    sizes: &[u64],
    seqs: &[usize],
    periods: usize,
    comp: Components,
    reps: usize,
    seed: u64,
) -> MonteCarlo {
    let g = gls_theta_weights(sizes, seqs, periods, comp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let theta = 1.0;
    let mut estimates = Vec::with_capacity(reps);
    let mut ybar = vec![0.0; sizes.len() * periods];
    for _ in 0..reps {
        for (i, (&n, &l)) in sizes.iter().zip(seqs).enumerate() {
            let alpha = comp.tau2.sqrt() * std.sample(&mut rng);
            let zeta: Vec<f64> = (0..n)
                .map(|_| comp.omega2.sqrt() * std.sample(&mut rng))
                .collect();
            for j in 0..periods {
                let treated = if j + l >= periods { theta } else { 0.0 };
                let mut sum = 0.0;
                for z in &zeta {
                    sum += z + comp.sigma_e2.sqrt() * std.sample(&mut rng);
                }
                ybar[i * periods + j] = j as f64 + treated + alpha + sum / n as f64;
            }
        }
        estimates.push(g.iter().zip(&ybar).map(|(a, b)| a * b).sum::<f64>());
    }
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    MonteCarlo {
        mean,
        variance,
        reps,
    }
}
