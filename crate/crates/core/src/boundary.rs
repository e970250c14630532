//! Optimal-boundary representation and the Monte-Carlo fixed-point solver.
//!
//! The optimal boundary `b` solves `b(x) = Psi(x, b(x); b)` where
//!
//! ```text
//! Psi(x, y; b) = f(x) + lambda / r * E[(Q1 X_zeta + Q2 Y_zeta - r I) 1{Y_zeta >= b(X_zeta)}]
//! ```
//!
//! with `(X, Y)` started at `(x, y)` and `zeta ~ Exp(r)`. Starting from a
//! parabola through `(0, y*)` with vertex `(x*, 0)`, the solver iterates
//! `b_n(x) = Psi(x, b_{n-1}(x); b_{n-1})` on a Chebyshev grid over `[0, x*]`,
//! projecting every iterate back into the admissible class (nonincreasing,
//! between `max(h, 0)` and `y*`, anchored at both axis thresholds).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{x_star, y_star};
use crate::error::{Error, Result};
use crate::estimate::{Accumulator, ValueEstimate};
use crate::isotonic::project_nonincreasing;
use crate::model::ModelParams;
use crate::sampler::{draw_batch, SamplerConfig, StateSample};

/// Default number of grid nodes.
pub const DEFAULT_GRID: usize = 40;

/// Anything that can be used as a stopping boundary `x -> b(x)`.
pub trait BoundaryCurve: Sync {
    fn eval(&self, x: f64) -> f64;

    /// Abscissae where the curve may have a kink (quadrature break points).
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Least upper bound of the curve; infinite when unknown.
    fn sup(&self) -> f64 {
        f64::INFINITY
    }
}

impl<F: Fn(f64) -> f64 + Sync> BoundaryCurve for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A boundary that is the same constant everywhere. `0` stops immediately,
/// `f64::INFINITY` never stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBoundary(pub f64);

impl BoundaryCurve for ConstantBoundary {
    fn eval(&self, _x: f64) -> f64 {
        self.0
    }

    fn sup(&self) -> f64 {
        self.0
    }
}

/// Piecewise-linear boundary on a strictly increasing grid starting at 0,
/// extended by `b = 0` beyond the last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    xs: Vec<f64>,
    bs: Vec<f64>,
}

impl Boundary {
    /// Builds a boundary from raw nodes; checks only the grid shape.
    pub fn from_nodes(xs: Vec<f64>, bs: Vec<f64>) -> Result<Self> {
        if xs.len() != bs.len() {
            return Err(Error::Domain(format!(
                "{} grid nodes but {} values",
                xs.len(),
                bs.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::Domain("a boundary needs at least two nodes".into()));
        }
        if xs[0] != 0.0 {
            return Err(Error::Domain(format!(
                "grid must start at 0, starts at {}",
                xs[0]
            )));
        }
        if xs.iter().chain(bs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("boundary nodes must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        Ok(Boundary { xs, bs })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn bs(&self) -> &[f64] {
        &self.bs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Right end of the grid (`x*` for solver output).
    pub fn x_end(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= 0.0 {
            return self.bs[0];
        }
        if x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let t = (x - x0) / (x1 - x0);
        self.bs[i - 1] + t * (self.bs[i] - self.bs[i - 1])
    }

    /// Same grid, new node values.
    pub fn with_values(&self, bs: Vec<f64>) -> Result<Self> {
        Boundary::from_nodes(self.xs.clone(), bs)
    }

    /// Samples an arbitrary curve on this boundary's grid.
    pub fn resample<C: BoundaryCurve + ?Sized>(xs: &[f64], curve: &C) -> Result<Self> {
        Boundary::from_nodes(xs.to_vec(), xs.iter().map(|&x| curve.eval(x)).collect())
    }

    /// Lists violated admissibility conditions; empty means admissible.
    pub fn check_invariants(&self, p: &ModelParams, tol: &InvariantTolerance) -> Vec<String> {
        let mut out = Vec::new();
        let (xs, ys) = (x_star(p), y_star(p));
        let n = self.len();
        if (self.x_end() - xs).abs() > 1e-9 * xs {
            out.push(format!(
                "grid ends at {} instead of x* = {xs}",
                self.x_end()
            ));
        }
        if (self.bs[0] - ys).abs() > tol.value {
            out.push(format!("b(0) = {} differs from y* = {ys}", self.bs[0]));
        }
        if self.bs[n - 1].abs() > tol.value {
            out.push(format!("b(x*) = {} is not 0", self.bs[n - 1]));
        }
        for i in 0..n {
            let (x, b) = (self.xs[i], self.bs[i]);
            if i + 1 < n && self.bs[i + 1] > b + 1e-12 * ys {
                out.push(format!(
                    "increasing between x = {x} and x = {}",
                    self.xs[i + 1]
                ));
            }
            let floor = p.kill_line(x).max(0.0);
            if b < floor - 1e-9 * ys {
                out.push(format!("b({x}) = {b} below max(h, 0) = {floor}"));
            }
            if b > ys + 1e-9 * ys {
                out.push(format!("b({x}) = {b} above y* = {ys}"));
            }
            if b < p.indifference(x) - tol.value {
                out.push(format!("b({x}) = {b} below f = {}", p.indifference(x)));
            }
            if i > 0 && i + 1 < n {
                let defect = self.convexity_defect(i);
                if defect > tol.convex {
                    out.push(format!("convexity defect {defect} at x = {x}"));
                }
            }
        }
        out
    }

    /// Height of node `i` above the chord through its neighbours
    /// (positive means locally concave).
    pub fn convexity_defect(&self, i: usize) -> f64 {
        let (xl, xm, xr) = (self.xs[i - 1], self.xs[i], self.xs[i + 1]);
        let chord = ((xr - xm) * self.bs[i - 1] + (xm - xl) * self.bs[i + 1]) / (xr - xl);
        self.bs[i] - chord
    }
}

impl BoundaryCurve for Boundary {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.value_at(x)
    }

    fn kinks(&self) -> Vec<f64> {
        self.xs.clone()
    }

    fn sup(&self) -> f64 {
        self.bs.iter().copied().fold(0.0, f64::max)
    }
}

/// Tolerances for [`Boundary::check_invariants`], in price units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTolerance {
    /// Anchor and `b >= f` slack.
    pub value: f64,
    /// Allowed height of a node above the chord of its neighbours.
    pub convex: f64,
}

/// Chebyshev–Lobatto nodes on `[0, x_end]`, clustered at both ends.
pub fn chebyshev_grid(x_end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut xs: Vec<f64> = (0..n)
        .map(|i| 0.5 * x_end * (1.0 - (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    xs[0] = 0.0;
    xs[n - 1] = x_end;
    xs
}

/// Initial guess `y* (1 - x/x*)^2` on a Chebyshev grid of `n` nodes.
pub fn initial_parabola(p: &ModelParams, n: usize) -> Boundary {
    let (xs_end, ys) = (x_star(p), y_star(p));
    let xs = chebyshev_grid(xs_end, n);
    let bs = xs
        .iter()
        .map(|&x| ys * (1.0 - x / xs_end).powi(2))
        .collect();
    Boundary::from_nodes(xs, bs).expect("parabola nodes are valid")
}

/// Straight line from `(0, y*)` to `(x*, 0)`, lifted to `max(h, 0)` where needed.
pub fn initial_line(p: &ModelParams, n: usize) -> Boundary {
    let (xs_end, ys) = (x_star(p), y_star(p));
    let xs = chebyshev_grid(xs_end, n);
    let bs = xs
        .iter()
        .map(|&x| (ys * (1.0 - x / xs_end)).max(p.kill_line(x).max(0.0)))
        .collect();
    Boundary::from_nodes(xs, bs).expect("line nodes are valid")
}

/// How `E[H(X, Y) 1{Y >= b(X)}]` is estimated from a batch.
///
/// With `sigma2^2 >= r - 2 alpha2` the reward `H(X_zeta, Y_zeta)` has
/// infinite variance and the plain sample mean is dominated by rare large
/// draws. Since `E[H] = r F(x, y)` in closed form, the same expectation equals
/// `r F - E[H 1{Y < b(X)}]`, whose integrand is bounded by the boundary
/// whenever `b` is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardEstimator {
    /// Sample mean of `H 1{Y >= b(X)}`.
    Direct,
    /// `r F` minus the sample mean of `H 1{Y < b(X)}`.
    Complement,
    /// `Complement` for bounded boundaries, `Direct` otherwise.
    #[default]
    Auto,
}

impl RewardEstimator {
    fn resolve<C: BoundaryCurve + ?Sized>(self, b: &C) -> RewardEstimator {
        match self {
            RewardEstimator::Auto if b.sup().is_finite() => RewardEstimator::Complement,
            RewardEstimator::Auto => RewardEstimator::Direct,
            other => other,
        }
    }
}

impl std::str::FromStr for RewardEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(RewardEstimator::Direct),
            "complement" => Ok(RewardEstimator::Complement),
            "auto" => Ok(RewardEstimator::Auto),
            _ => Err(Error::Param(format!(
                "unknown estimator '{s}' (expected direct, complement or auto)"
            ))),
        }
    }
}

/// `Psi(x, y; b)` estimated on a batch drawn from unit starting prices.
pub fn psi_on_batch<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    batch: &[StateSample],
    antithetic: bool,
    x: f64,
    y: f64,
    b: &C,
    estimator: RewardEstimator,
) -> ValueEstimate {
    let integral = reward_on_batch(p, batch, antithetic, x, y, b, estimator);
    integral.affine(p.indifference(x), p.lambda() / p.r())
}

/// Estimate of `E[(Q1 X + Q2 Y - r I) 1{Y >= b(X)}]` from `(x, y)`, using the
/// unit-start batch rescaled to `(x, y)`.
pub fn reward_on_batch<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    batch: &[StateSample],
    antithetic: bool,
    x: f64,
    y: f64,
    b: &C,
    estimator: RewardEstimator,
) -> ValueEstimate {
    let (q1x, q2y, ri) = (p.q1() * x, p.q2() * y, p.r() * p.cost());
    let complement = estimator.resolve(b) == RewardEstimator::Complement;
    let mut acc = Accumulator::new(antithetic);
    for s in batch {
        let above = y * s.y_unit_at_zeta >= b.eval(x * s.x_at_zeta);
        let v = if above != complement {
            q1x * s.x_at_zeta + q2y * s.y_unit_at_zeta - ri
        } else {
            0.0
        };
        acc.push(v);
    }
    let est = acc.finish();
    if complement {
        est.affine(p.r() * p.payoff(x, y), -1.0)
    } else {
        est
    }
}

/// Monte-Carlo estimate of `Psi(x, y; b)` with a batch drawn from `cfg`.
pub fn psi<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    cfg: &SamplerConfig,
    estimator: RewardEstimator,
) -> Result<ValueEstimate> {
    if !(x >= 0.0) || !(y >= 0.0) {
        return Err(Error::Domain(format!("psi needs x, y >= 0 (got {x}, {y})")));
    }
    let batch = draw_batch(p, cfg, 1.0)?;
    Ok(psi_on_batch(p, &batch, cfg.antithetic, x, y, b, estimator))
}

/// Raw `Psi` at every grid node of `b`, with `y = b(x)` at each node.
pub fn psi_at_nodes(
    p: &ModelParams,
    b: &Boundary,
    batch: &[StateSample],
    antithetic: bool,
    estimator: RewardEstimator,
) -> Vec<ValueEstimate> {
    b.xs()
        .par_iter()
        .zip(b.bs().par_iter())
        .map(|(&x, &y)| psi_on_batch(p, batch, antithetic, x, y, b, estimator))
        .collect()
}

/// Projects raw node values into the admissible class: clamp to
/// `[max(h, 0), y*]`, pool adjacent violators, re-anchor the endpoints.
pub fn project_admissible(p: &ModelParams, xs: &[f64], raw: &[f64]) -> Vec<f64> {
    let ys = y_star(p);
    let floor: Vec<f64> = xs.iter().map(|&x| p.kill_line(x).max(0.0)).collect();
    let clamped: Vec<f64> = raw
        .iter()
        .zip(&floor)
        .map(|(&v, &lo)| v.clamp(lo, ys))
        .collect();
    let mut out = project_nonincreasing(&clamped);
    for (v, &lo) in out.iter_mut().zip(&floor) {
        *v = v.max(lo).min(ys);
    }
    out[0] = ys;
    *out.last_mut().unwrap() = 0.0;
    out
}

/// One projected fixed-point step on a given batch, with relaxation `theta`.
pub fn iterate_on_batch(
    p: &ModelParams,
    b_prev: &Boundary,
    batch: &[StateSample],
    antithetic: bool,
    theta: f64,
    estimator: RewardEstimator,
) -> Boundary {
    let raw: Vec<f64> = psi_at_nodes(p, b_prev, batch, antithetic, estimator)
        .iter()
        .zip(b_prev.bs())
        .map(|(e, &old)| theta * e.mean + (1.0 - theta) * old)
        .collect();
    let bs = project_admissible(p, b_prev.xs(), &raw);
    b_prev.with_values(bs).expect("projection keeps the grid")
}

/// One fixed-point step `b_n(x) = Psi(x, b_{n-1}(x); b_{n-1})` with a batch drawn from `cfg`.
pub fn iterate_once(
    p: &ModelParams,
    b_prev: &Boundary,
    cfg: &SamplerConfig,
    estimator: RewardEstimator,
) -> Result<Boundary> {
    let batch = draw_batch(p, cfg, 1.0)?;
    Ok(iterate_on_batch(
        p,
        b_prev,
        &batch,
        cfg.antithetic,
        1.0,
        estimator,
    ))
}

/// Settings of the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub grid_size: usize,
    pub sampler: SamplerConfig,
    /// Stop once the sup-norm change between iterates drops below this (price units).
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `theta` in `(0, 1]`; 1 is the plain iteration.
    pub relaxation: f64,
    pub batches: BatchPolicy,
    pub estimator: RewardEstimator,
}

/// Which random numbers successive iterations see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchPolicy {
    /// One batch shared by every iteration; the iteration map is deterministic.
    Common,
    /// A fresh batch per iteration, seeded from the master seed and iteration index.
    FreshPerIteration,
}

impl SolverSettings {
    /// Defaults: 40 nodes, 10^5 samples, seed 1, `tol = 0.005 y*`, 50 iterations.
    pub fn for_params(p: &ModelParams) -> Self {
        SolverSettings {
            grid_size: DEFAULT_GRID,
            sampler: SamplerConfig::default(),
            tol: 0.005 * y_star(p),
            max_iter: 50,
            relaxation: 1.0,
            batches: BatchPolicy::Common,
            estimator: RewardEstimator::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.grid_size < 8 {
            return Err(Error::Param(format!(
                "grid size must be at least 8, got {}",
                self.grid_size
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Param(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::Param("max_iter must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Param(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Diagnostics of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub sup_change_history: Vec<f64>,
    /// `sup |b(x) - Psi(x, b(x); b)|` over interior nodes, on an independent batch.
    pub residual: f64,
    /// Largest per-node standard error of the residual estimate.
    pub residual_se: f64,
    /// Per-node standard error of `Psi` on the residual batch (0 at the pinned endpoints).
    pub node_se: Vec<f64>,
    pub converged: bool,
}

/// Seed tag of the residual batch; iterations use tags `1..=max_iter`.
const RESIDUAL_TAG: u64 = u64::MAX;

/// Solves from the parabola initial guess.
pub fn solve(p: &ModelParams, settings: &SolverSettings) -> Result<(Boundary, SolveReport)> {
    solve_from(p, initial_parabola(p, settings.grid_size), settings)
}

/// Solves from a caller-supplied initial boundary (its grid is kept).
pub fn solve_from(
    p: &ModelParams,
    initial: Boundary,
    settings: &SolverSettings,
) -> Result<(Boundary, SolveReport)> {
    settings.validate()?;
    let antithetic = settings.sampler.antithetic;
    let mut b = Boundary::from_nodes(
        initial.xs().to_vec(),
        project_admissible(p, initial.xs(), initial.bs()),
    )?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut common = None;
    for it in 1..=settings.max_iter {
        let fresh;
        let batch: &[StateSample] = match settings.batches {
            BatchPolicy::Common => {
                common.get_or_insert(draw_batch(p, &settings.sampler.reseeded(1), 1.0)?)
            }
            BatchPolicy::FreshPerIteration => {
                fresh = draw_batch(p, &settings.sampler.reseeded(it as u64), 1.0)?;
                &fresh
            }
        };
        let next = iterate_on_batch(
            p,
            &b,
            batch,
            antithetic,
            settings.relaxation,
            settings.estimator,
        );
        let change = b
            .bs()
            .iter()
            .zip(next.bs())
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        history.push(change);
        b = next;
        if change < settings.tol {
            converged = true;
            break;
        }
    }
    let (residual, node_se) = fixed_point_residual(
        p,
        &b,
        &settings.sampler.reseeded(RESIDUAL_TAG),
        settings.estimator,
    )?;
    let residual_se = node_se.iter().copied().fold(0.0, f64::max);
    let report = SolveReport {
        iterations: history.len(),
        sup_change_history: history,
        residual,
        residual_se,
        node_se,
        converged,
    };
    Ok((b, report))
}

/// `sup |b - Psi(., b(.); b)|` over interior nodes and the per-node standard errors.
pub fn fixed_point_residual(
    p: &ModelParams,
    b: &Boundary,
    cfg: &SamplerConfig,
    estimator: RewardEstimator,
) -> Result<(f64, Vec<f64>)> {
    let batch = draw_batch(p, cfg, 1.0)?;
    let est = psi_at_nodes(p, b, &batch, cfg.antithetic, estimator);
    let n = b.len();
    let mut node_se = vec![0.0; n];
    let mut sup: f64 = 0.0;
    for i in 1..n - 1 {
        node_se[i] = est[i].std_error;
        sup = sup.max((b.bs()[i] - est[i].mean).abs());
    }
    Ok((sup, node_se))
}
