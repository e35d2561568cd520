//! Delta-method approximations to `W` and `W beta` when only the mean and
//! coefficient of variation of the cluster sizes are known.

use std::fmt;

use crate::error::{Result, SwdError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeMoments {
    mean: f64,
    cv: f64,
    clusters: Option<usize>,
}

impl SizeMoments {
    pub fn new(mean: f64, cv: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(SwdError::InvalidInput(format!(
                "mean cluster size must be positive, got {mean}"
            )));
        }
        if !(cv.is_finite() && cv >= 0.0) {
            return Err(SwdError::InvalidInput(format!(
                "coefficient of variation must be nonnegative, got {cv}"
            )));
        }
        Ok(SizeMoments {
            mean,
            cv,
            clusters: None,
        })
    }

    pub fn with_clusters(mut self, clusters: usize) -> Self {
        self.clusters = Some(clusters);
        self
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cv(&self) -> f64 {
        self.cv
    }

    pub fn clusters(&self) -> Option<usize> {
        self.clusters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionOrder {
    First,
    Second,
}

impl fmt::Display for ExpansionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpansionOrder::First => "first",
            ExpansionOrder::Second => "second",
        })
    }
}

fn check(lambda: f64, periods: usize) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SwdError::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if periods < 2 {
        return Err(SwdError::InvalidDesign(format!(
            "at least 2 periods are needed, got {periods}"
        )));
    }
    Ok(())
}

/// `E(W) ~ M / (lambda + M T)`, plus `lambda^2 M CV^2 / (lambda + M T)^3` at second order.
pub fn approx_w(
    moments: &SizeMoments,
    lambda: f64,
    periods: usize,
    order: ExpansionOrder,
) -> Result<f64> {
    check(lambda, periods)?;
    let m = moments.mean;
    let denom = lambda + m * periods as f64;
    let first = m / denom;
    Ok(match order {
        ExpansionOrder::First => first,
        ExpansionOrder::Second => {
            first + lambda * lambda * m * moments.cv * moments.cv / denom.powi(3)
        }
    })
}

/// `E(W beta) ~ (1 - lambda^2 / (lambda + M T)^2) / T`; always in `[0, 1/T]`.
pub fn approx_w_beta(moments: &SizeMoments, lambda: f64, periods: usize) -> Result<f64> {
    check(lambda, periods)?;
    let t = periods as f64;
    let ratio = lambda / (lambda + moments.mean * t);
    Ok((1.0 - ratio * ratio) / t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub w_first: f64,
    pub w_second: f64,
    pub w_beta: f64,
}

pub fn moment_summary(moments: &SizeMoments, lambda: f64, periods: usize) -> Result<MomentSummary> {
    Ok(MomentSummary {
        w_first: approx_w(moments, lambda, periods, ExpansionOrder::First)?,
        w_second: approx_w(moments, lambda, periods, ExpansionOrder::Second)?,
        w_beta: approx_w_beta(moments, lambda, periods)?,
    })
}
