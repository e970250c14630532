//! Deterministic evaluation of the integral-equation right-hand side by
//! nested quadrature, used to cross-check the Monte-Carlo `Psi`.
//!
//! The right-hand side is
//!
//! ```text
//! R(x, y; b) = int_0^inf e^{-rt} int rho1(t, x, psi) int_{b(psi)}^inf (Q1 psi + Q2 eta - r I) rho2(t, y, eta) d eta d psi dt
//! ```
//!
//! so that `Psi(x, y; b) = f(x) + lambda R(x, y; b)`. The innermost integral
//! is a log-normal partial expectation and is evaluated in closed form. The
//! `psi` integral runs over a standard normal variable and the time integral
//! over `u = 1 - e^{-rt}`, both by adaptive Gauss–Kronrod. Time is cut at
//! `t_cutoff`; the discarded tail is bounded by
//! `Q1 x e^{-delta1 T}/delta1 + Q2 y e^{-delta2 T}/delta2 + I e^{-rT}` and
//! added to the reported error bound.

use std::cell::RefCell;

use statrs::function::erf::erfc;

use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quad::{integrate_pieces, QuadResult, QuadSettings};
use crate::sampler::density_unchecked;

/// Settings of the quadrature oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Truncation horizon of the time integral.
    pub t_cutoff: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadConfig {
    /// Cut-off at `u = 1 - 1e-8`, relative tolerance `1e-6`.
    pub fn for_params(p: &ModelParams) -> Self {
        QuadConfig {
            t_cutoff: -(1e-8f64).ln() / p.r(),
            rel_tol: 1e-6,
            max_subdivisions: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_cutoff > 0.0) {
            return Err(Error::Param(format!(
                "t_cutoff must be positive, got {}",
                self.t_cutoff
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::Param(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Param("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

/// Quadrature value with an error bound that includes the time-tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub error_bound: f64,
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(d: f64) -> f64 {
    0.5 * erfc(-d / std::f64::consts::SQRT_2)
}

#[inline]
fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `int_cut^inf (a + q2 eta) rho2(t, start, eta) d eta` in closed form.
#[inline]
fn upper_partial(p: &ModelParams, t: f64, start: f64, cut: f64, a: f64) -> f64 {
    if cut == f64::INFINITY {
        return 0.0;
    }
    if start <= 0.0 {
        // Y is absorbed at 0
        return if cut <= 0.0 { a } else { 0.0 };
    }
    let growth = start * (p.alpha2() * t).exp();
    if cut <= 0.0 {
        return a + p.q2() * growth;
    }
    let sd = p.sigma2() * t.sqrt();
    let d2 = ((start / cut).ln() + (p.alpha2() - 0.5 * p.sigma2() * p.sigma2()) * t) / sd;
    a * norm_cdf(d2) + p.q2() * growth * norm_cdf(d2 + sd)
}

#[inline]
fn time_of(p: &ModelParams, u: f64) -> f64 {
    -(-u).ln_1p() / p.r()
}

fn tail_bound(p: &ModelParams, x: f64, y: f64, t_cut: f64) -> f64 {
    p.q1() * x * (-p.delta1() * t_cut).exp() / p.delta1()
        + p.q2() * y * (-p.delta2() * t_cut).exp() / p.delta2()
        + p.cost() * (-p.r() * t_cut).exp()
}

struct ErrorSlot(RefCell<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        ErrorSlot(RefCell::new(None))
    }
    fn keep(&self, r: Result<QuadResult>) -> f64 {
        match r {
            Ok(v) => v.value,
            Err(e) => {
                let value = if let Error::Accuracy { estimate, .. } = &e {
                    *estimate
                } else {
                    f64::NAN
                };
                self.0.borrow_mut().get_or_insert(e);
                value
            }
        }
    }
    fn take(self) -> Option<Error> {
        self.0.into_inner()
    }
}

/// `E[(Q1 X_t + Q2 Y_t - r I) 1{Y_t >= b(X_t)}]` at a fixed time `t`.
#[allow(clippy::too_many_arguments)]
fn expected_reward_at<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    t: f64,
    inner: &QuadSettings,
    kinks: &[f64],
    errs: &ErrorSlot,
) -> f64 {
    let ri = p.r() * p.cost();
    if x <= 0.0 {
        return upper_partial(p, t, y, b.eval(0.0), -ri);
    }
    let sd = p.sigma1() * t.sqrt();
    let drift = (p.alpha1() - 0.5 * p.sigma1() * p.sigma1()) * t;
    let integrand = |z: f64| {
        let psi = x * (drift + sd * z).exp();
        norm_pdf(z) * upper_partial(p, t, y, b.eval(psi), p.q1() * psi - ri)
    };
    let (lo, hi) = (-10.0, 10.0 + sd);
    let mut breaks: Vec<f64> = kinks
        .iter()
        .filter(|&&k| k > 0.0)
        .map(|&k| ((k / x).ln() - drift) / sd)
        .filter(|z| *z > lo && *z < hi)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    errs.keep(integrate_pieces(integrand, lo, hi, &breaks, inner))
}

/// Nested-quadrature value of the right-hand side `R(x, y; b)`.
pub fn rhs_quadrature<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    q: &QuadConfig,
) -> Result<QuadValue> {
    q.validate()?;
    if !(x >= 0.0) || !(y >= 0.0) {
        return Err(Error::Domain(format!(
            "rhs_quadrature needs x, y >= 0 (got {x}, {y})"
        )));
    }
    let scale = p.q1() * x + p.q2() * y + p.r() * p.cost();
    let inner = QuadSettings {
        rel_tol: q.rel_tol * 0.05,
        abs_tol: q.rel_tol * 0.05 * scale,
        max_subdivisions: q.max_subdivisions,
    };
    let outer = QuadSettings {
        rel_tol: q.rel_tol,
        abs_tol: q.rel_tol * scale / p.r(),
        max_subdivisions: q.max_subdivisions,
    };
    let kinks = b.kinks();
    let errs = ErrorSlot::new();
    let u_max = -(-p.r() * q.t_cutoff).exp_m1();
    let res = integrate_pieces(
        |u| expected_reward_at(p, x, y, b, time_of(p, u), &inner, &kinks, &errs) / p.r(),
        0.0,
        u_max,
        &[],
        &outer,
    )?;
    if let Some(e) = errs.take() {
        return Err(e);
    }
    Ok(QuadValue {
        value: res.value,
        error_bound: res.error + tail_bound(p, x, y, q.t_cutoff),
    })
}

/// Deterministic `Psi(x, y; b) = f(x) + lambda R(x, y; b)`.
pub fn psi_quadrature<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    q: &QuadConfig,
) -> Result<QuadValue> {
    let r = rhs_quadrature(p, x, y, b, q)?;
    Ok(QuadValue {
        value: p.indifference(x) + p.lambda() * r.value,
        error_bound: p.lambda() * r.error_bound,
    })
}

const KERNEL_LOG_T_MIN: f64 = -40.0;

/// Fredholm kernel
/// `K(x, psi, start, cut) = int_0^inf e^{-rt} rho1(t, x, psi) int_cut^inf (Q1 psi + Q2 eta - r I) rho2(t, start, eta) d eta dt`.
pub fn fredholm_kernel(
    p: &ModelParams,
    x: f64,
    psi: f64,
    start: f64,
    cut: f64,
    q: &QuadConfig,
) -> Result<QuadValue> {
    q.validate()?;
    if !(psi > 0.0) || !(start > 0.0) || !(x > 0.0) {
        return Err(Error::Domain(format!(
            "kernel needs x, psi, start > 0 (got {x}, {psi}, {start})"
        )));
    }
    if cut == f64::INFINITY {
        return Ok(QuadValue {
            value: 0.0,
            error_bound: 0.0,
        });
    }
    let a = p.q1() * psi - p.r() * p.cost();
    let scale = (p.q1() * psi + p.q2() * start + p.r() * p.cost()) / (p.r() * psi);
    let settings = QuadSettings {
        rel_tol: q.rel_tol,
        abs_tol: q.rel_tol * 1e-3 * scale,
        max_subdivisions: q.max_subdivisions,
    };
    // log-time resolves the spike of the transition density near t = 0
    let log_ratio = (psi / x).ln();
    let peak = (log_ratio * log_ratio / (p.sigma1() * p.sigma1()))
        .max(1e-300)
        .ln();
    let (lo, hi) = (KERNEL_LOG_T_MIN, q.t_cutoff.ln());
    let res = integrate_pieces(
        |v| {
            let t = v.exp();
            t * (-p.r() * t).exp()
                * density_unchecked(p.alpha1(), p.sigma1(), t, x, psi)
                * upper_partial(p, t, start, cut, a)
        },
        lo,
        hi,
        &[peak],
        &settings,
    )?;
    Ok(QuadValue {
        value: res.value,
        error_bound: res.error,
    })
}

/// `int_0^inf K(x, psi, y, b(psi)) d psi`, the Fubini-reordered right-hand side.
pub fn kernel_integral<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    q: &QuadConfig,
) -> Result<QuadValue> {
    q.validate()?;
    if !(x > 0.0) || !(y > 0.0) {
        return Err(Error::Domain(format!(
            "kernel_integral needs x, y > 0 (got {x}, {y})"
        )));
    }
    let errs = ErrorSlot::new();
    let kernel_q = QuadConfig {
        rel_tol: q.rel_tol * 0.05,
        ..*q
    };
    let scale = p.q1() * x + p.q2() * y + p.r() * p.cost();
    let outer = QuadSettings {
        rel_tol: q.rel_tol,
        abs_tol: q.rel_tol * 0.1 * scale / p.r(),
        max_subdivisions: q.max_subdivisions,
    };
    let mut breaks: Vec<f64> = b
        .kinks()
        .iter()
        .filter(|&&k| k > 0.0)
        .map(|&k| (k / x).ln())
        .collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let res = integrate_pieces(
        |s| {
            let psi = x * s.exp();
            let k = fredholm_kernel(p, x, psi, y, b.eval(psi), &kernel_q).map(|v| QuadResult {
                value: v.value,
                error: v.error_bound,
            });
            psi * errs.keep(k)
        },
        -20.0,
        20.0,
        &breaks,
        &outer,
    )?;
    if let Some(e) = errs.take() {
        return Err(e);
    }
    Ok(QuadValue {
        value: res.value,
        error_bound: res.error + tail_bound(p, x, y, q.t_cutoff),
    })
}
