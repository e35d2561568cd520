//! Closed-form optimal individual allocations for a fixed cluster disposition.

use nalgebra::DVector;

use crate::approx::{ApproxConstants, RegressionFit};
use crate::error::Result;
use crate::geometry::{build_geometry, dot, quad_form, SequenceGeometry};

/// Optimum of `V(P, K)` over `P` with `K` (hence `a`, `b`) held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalDesign {
    /// Unconstrained stationary point on `1^T P = 1`.
    pub p_opt: DVector<f64>,
    pub v_opt: f64,
    pub a: f64,
    pub b: f64,
    /// Whether every entry of `p_opt` is nonnegative.
    pub feasible: bool,
    /// Simplex-constrained maximizer, present only when `p_opt` is infeasible.
    pub constrained: Option<ConstrainedOptimum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedOptimum {
    pub p: DVector<f64>,
    pub v: f64,
    pub iterations: usize,
}

impl OptimalDesign {
    /// The allocation to aim for: `p_opt` when feasible, otherwise the constrained maximizer.
    pub fn target(&self) -> &DVector<f64> {
        self.constrained.as_ref().map_or(&self.p_opt, |c| &c.p)
    }
}

/// `(1^T A^{-1} 1)^{-1} = (S-1)(3 - 3(S-1) W beta + S(S-2) W^2 beta^2) / 12`.
pub fn balanced_bound(w_beta: f64, s: usize) -> f64 {
    let s = s as f64;
    (s - 1.0) * (3.0 - 3.0 * (s - 1.0) * w_beta + s * (s - 2.0) * w_beta * w_beta) / 12.0
}

/// `A^{-1} 1` from its closed form.
pub fn a_inv_ones(constants: &ApproxConstants, geometry: &SequenceGeometry) -> DVector<f64> {
    let s = geometry.sequences() as f64;
    let wb = constants.w * constants.beta;
    let den = 12.0 * balanced_bound(wb, geometry.sequences());
    (geometry.ones() * (12.0 * wb) + &geometry.e * (6.0 * (1.0 - wb * s))) / den
}

/// `A^{-1} z = f / (1 - gamma W (S - 1))`.
pub fn a_inv_z(constants: &ApproxConstants, geometry: &SequenceGeometry) -> DVector<f64> {
    &geometry.f / constants.outer_gap()
}

impl ApproxConstants {
    /// Maximum of `V` over `P` for a cluster disposition with linear forms `a`, `b`.
    pub fn optimal_value(&self, a: f64, b: f64) -> f64 {
        balanced_bound(self.w * self.beta, self.sequences()) - self.h3 * b * b
            + self.outer_loading_coefficient() * a
    }
}

/// `P_opt = W beta 1 + (1 - W beta S)/2 e - h1 b / (2 (1 - gamma W (S-1))) f`,
/// with a projected-ascent fallback when that point leaves the simplex.
pub fn optimal_p(
    constants: &ApproxConstants,
    geometry: &SequenceGeometry,
    k: &DVector<f64>,
) -> OptimalDesign {
    let s = geometry.sequences() as f64;
    let b = dot(k, &geometry.z);
    let a = dot(k, &geometry.y);
    let wb = constants.w * constants.beta;
    let p_opt = geometry.ones() * wb + &geometry.e * (0.5 * (1.0 - wb * s))
        - &geometry.f * (constants.h1 * b / (2.0 * constants.outer_gap()));
    let v_opt = constants.optimal_value(a, b);
    let feasible = p_opt.iter().all(|&x| x >= -1e-12);
    let constrained = (!feasible).then(|| constrained_maximum(constants, geometry, a, b));
    OptimalDesign {
        p_opt,
        v_opt,
        a,
        b,
        feasible,
        constrained,
    }
}

/// Upper bound on `V` at fixed `a`, `b`, built from the regression fit alone:
/// `(S-1)(3 - 3(S-1) W beta + S(S-2) W^2 beta^2)/12 - h3 b^2 - W(1 - beta) a`.
pub fn optimal_value_formula(fit: &RegressionFit, s: usize, a: f64, b: f64) -> Result<f64> {
    let geometry = build_geometry(s)?;
    let constants = ApproxConstants::new(fit, &geometry)?;
    Ok(constants.optimal_value(a, b))
}

/// Maximizer of `P^T (Xi - W Lambda + W Delta) P`, the `P = K` case:
/// `W 1 + (1 - W S)/2 e`.
pub fn optimal_p_equal_case(fit: &RegressionFit, geometry: &SequenceGeometry) -> DVector<f64> {
    let s = geometry.sequences() as f64;
    geometry.ones() * fit.w + &geometry.e * (0.5 * (1.0 - fit.w * s))
}

/// `P^T (Xi - W Lambda + W Delta) P`.
pub fn precision_equal_case(p: &DVector<f64>, w: f64, geometry: &SequenceGeometry) -> f64 {
    let m = &geometry.xi - &geometry.lambda * w + &geometry.delta * w;
    quad_form(p, &m, p)
}

/// Euclidean projection onto `{x >= 0, sum x = 1}`.
pub fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if x - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.map(|x| (x - shift).max(0.0))
}

const ASCENT_TOL: f64 = 1e-10;
const ASCENT_MAX_ITER: usize = 200_000;

fn constrained_maximum(
    constants: &ApproxConstants,
    geometry: &SequenceGeometry,
    a_form: f64,
    b: f64,
) -> ConstrainedOptimum {
    let a = &constants.a_matrix;
    let objective = |p: &DVector<f64>| quad_form(p, a, p) + constants.h1 * b * dot(&geometry.z, p);
    let lipschitz = 2.0 * a.norm();
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let linear = &geometry.z * (constants.h1 * b);
    let mut p = DVector::from_element(geometry.sequences(), 1.0 / geometry.sequences() as f64);
    let mut iterations = 0;
    while iterations < ASCENT_MAX_ITER {
        iterations += 1;
        let grad = a * &p * 2.0 + &linear;
        let next = project_to_simplex(&(&p + grad * step));
        let moved = (&next - &p).norm();
        p = next;
        if moved < ASCENT_TOL {
            break;
        }
    }
    let v = objective(&p) - constants.h2 * b * b + constants.outer_loading_coefficient() * a_form;
    ConstrainedOptimum { p, v, iterations }
}
