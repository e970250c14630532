//! One-dimensional benchmark problems on the two axes.
//!
//! On `y = 0` (resp. `x = 0`) the problem reduces to a perpetual investment
//! option on a single GBM, solved in closed form by the positive root of the
//! characteristic quadratic `sigma^2/2 beta (beta - 1) + alpha beta - r = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Solution of a one-dimensional perpetual investment problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneDimSolution {
    /// Positive characteristic root, always > 1.
    pub beta1: f64,
    /// Investment threshold (`x*` or `y*`).
    pub threshold: f64,
    /// Coefficient of `x^beta1` below the threshold (`A` or `D`).
    pub coeff: f64,
}

/// Positive root of `sigma^2/2 beta (beta - 1) + alpha beta - r = 0`.
pub fn positive_root(alpha: f64, sigma: f64, r: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(r > 0.0) || !(r > alpha) {
        return Err(Error::Param(format!(
            "positive_root needs sigma > 0, r > 0, r > alpha (got alpha={alpha}, sigma={sigma}, r={r})"
        )));
    }
    let a = 0.5 * sigma * sigma;
    let b = alpha - a;
    let disc = (b * b + 4.0 * a * r).sqrt();
    // conjugate form when b > 0 avoids cancellation in -b + disc
    let root = if b > 0.0 {
        2.0 * r / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    };
    Ok(root)
}

/// Residual of the characteristic quadratic at `beta`.
pub fn characteristic(alpha: f64, sigma: f64, r: f64, beta: f64) -> f64 {
    0.5 * sigma * sigma * beta * (beta - 1.0) + alpha * beta - r
}

/// Threshold and coefficient of the one-dimensional problem with output `q`,
/// net rate `delta = r - alpha` and cost `cost`.
pub fn solve_one_dim(
    q: f64,
    delta: f64,
    cost: f64,
    alpha: f64,
    sigma: f64,
    r: f64,
) -> Result<OneDimSolution> {
    if !(q > 0.0) || !(cost > 0.0) || !(delta > 0.0) {
        return Err(Error::Param(format!(
            "solve_one_dim needs Q > 0, I > 0, delta > 0 (got Q={q}, I={cost}, delta={delta})"
        )));
    }
    let beta1 = positive_root(alpha, sigma, r)?;
    let threshold = beta1 / ((beta1 - 1.0) * q) * delta * cost;
    let coeff = q / (beta1 * delta) * threshold.powf(1.0 - beta1);
    Ok(OneDimSolution {
        beta1,
        threshold,
        coeff,
    })
}

/// Value function of the one-dimensional problem.
pub fn value_v1(s: &OneDimSolution, q: f64, delta: f64, cost: f64, x: f64) -> f64 {
    if x >= s.threshold {
        q * x / delta - cost
    } else if x <= 0.0 {
        0.0
    } else {
        s.coeff * x.powf(s.beta1)
    }
}

/// Derivative of [`value_v1`].
pub fn value_v1_derivative(s: &OneDimSolution, q: f64, delta: f64, x: f64) -> f64 {
    if x >= s.threshold {
        q / delta
    } else if x <= 0.0 {
        0.0
    } else {
        s.coeff * s.beta1 * x.powf(s.beta1 - 1.0)
    }
}

/// Benchmark on the `x` axis (`y = 0`).
pub fn x_axis(p: &ModelParams) -> OneDimSolution {
    solve_one_dim(p.q1(), p.delta1(), p.cost(), p.alpha1(), p.sigma1(), p.r())
        .expect("validated params always admit an x-axis solution")
}

/// Benchmark on the `y` axis (`x = 0`).
pub fn y_axis(p: &ModelParams) -> OneDimSolution {
    solve_one_dim(p.q2(), p.delta2(), p.cost(), p.alpha2(), p.sigma2(), p.r())
        .expect("validated params always admit a y-axis solution")
}

pub fn x_star(p: &ModelParams) -> f64 {
    x_axis(p).threshold
}

pub fn y_star(p: &ModelParams) -> f64 {
    y_axis(p).threshold
}

/// `v1(x)`: value on the `x` axis.
pub fn v1(p: &ModelParams, x: f64) -> f64 {
    value_v1(&x_axis(p), p.q1(), p.delta1(), p.cost(), x)
}

/// `v2(y)`: value on the `y` axis.
pub fn v2(p: &ModelParams, y: f64) -> f64 {
    value_v1(&y_axis(p), p.q2(), p.delta2(), p.cost(), y)
}
