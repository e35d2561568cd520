//! Fixed vectors and matrices of the classic stepped wedge with `S` sequences.
//!
//! Sequence `l` (1-based) receives the intervention in its last `l` periods.
//! Every object here is centrosymmetric or anti-centrosymmetric under sequence
//! reversal, and the summation helpers at the bottom of the module are ordered
//! so that reversing the input reverses nothing numerically: mirror-image
//! allocations evaluate to bit-identical values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SwdError};

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceGeometry {
    s: usize,
    /// `z_l = l - (S + 1) / 2`.
    pub z: DVector<f64>,
    /// `y_l = z_l^2`.
    pub y: DVector<f64>,
    /// Indicator of the two outer sequences.
    pub e: DVector<f64>,
    /// `+1` on sequence 1, `-1` on sequence `S`.
    pub f: DVector<f64>,
    /// `Xi[l, l'] = |l - l'| / 2`.
    pub xi: DMatrix<f64>,
    /// `y 1^T`.
    pub lambda_tilde: DMatrix<f64>,
    /// Symmetric part of `lambda_tilde`.
    pub lambda: DMatrix<f64>,
    /// `z z^T`.
    pub delta: DMatrix<f64>,
}

pub fn build_geometry(s: usize) -> Result<SequenceGeometry> {
    if s < 2 {
        return Err(SwdError::InvalidDesign(format!(
            "at least 2 sequences are needed, got {s}"
        )));
    }
    let centre = (s as f64 + 1.0) / 2.0;
    let z = DVector::from_fn(s, |l, _| (l + 1) as f64 - centre);
    let y = z.map(|v| v * v);
    let mut e = DVector::zeros(s);
    e[0] = 1.0;
    e[s - 1] = 1.0;
    let mut f = DVector::zeros(s);
    f[0] = 1.0;
    f[s - 1] = -1.0;
    let xi = DMatrix::from_fn(s, s, |i, j| (i as f64 - j as f64).abs() / 2.0);
    let lambda_tilde = DMatrix::from_fn(s, s, |i, _| y[i]);
    let lambda = DMatrix::from_fn(s, s, |i, j| (y[i] + y[j]) / 2.0);
    let delta = DMatrix::from_fn(s, s, |i, j| z[i] * z[j]);
    Ok(SequenceGeometry {
        s,
        z,
        y,
        e,
        f,
        xi,
        lambda_tilde,
        lambda,
        delta,
    })
}

impl SequenceGeometry {
    pub fn sequences(&self) -> usize {
        self.s
    }

    pub fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.s, 1.0)
    }

    /// Order-reversal permutation `R`.
    pub fn reversal(&self) -> DMatrix<f64> {
        DMatrix::from_fn(
            self.s,
            self.s,
            |i, j| if i + j + 1 == self.s { 1.0 } else { 0.0 },
        )
    }
}

pub fn reversed(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(n, |i, _| v[n - 1 - i])
}

/// Sums `term(0..n)` pairing index `i` with `n - 1 - i` before accumulating
/// (Neumaier-compensated) from the outside in. Reversing the terms leaves the
/// result bit-identical.
pub fn mirror_sum(n: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |x: f64| {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    };
    for i in 0..n / 2 {
        add(term(i) + term(n - 1 - i));
    }
    if n % 2 == 1 {
        add(term(n / 2));
    }
    sum + comp
}

pub fn dot(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    mirror_sum(x.len(), |i| x[i] * y[i])
}

/// `x^T M y` for a centrosymmetric `M`, evaluated with [`mirror_sum`] at both levels.
pub fn quad_form(x: &DVector<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len();
    mirror_sum(n, |i| x[i] * mirror_sum(n, |j| m[(i, j)] * y[j]))
}
