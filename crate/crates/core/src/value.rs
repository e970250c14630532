//! Monte-Carlo value function and the martingale check.
//!
//! For a stopping boundary `b` with stopping set `S = {y >= b(x)}`,
//!
//! ```text
//! V(x, y) = E[int_0^inf e^{-rt} H(X_t, Y_t) 1{(X_t, Y_t) in S} dt] = E[H(X_zeta, Y_zeta) 1{S}] / r
//! ```
//!
//! with `H = Q1 x + Q2 y - r I` and `zeta ~ Exp(r)`, so one exponential-time
//! draw per sample replaces the time integral.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{reward_on_batch, BoundaryCurve, RewardEstimator};
use crate::error::{Error, Result};
use crate::estimate::{mean_and_se, ValueEstimate};
use crate::model::ModelParams;
use crate::sampler::{derive_seed, draw_batch, gbm_step, path_rng, SamplerConfig, StateSample};

/// `V(x, y)` under `b` on a unit-start batch rescaled to `(x, y)`.
pub fn value_on_batch<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    batch: &[StateSample],
    antithetic: bool,
    x: f64,
    y: f64,
    b: &C,
    estimator: RewardEstimator,
) -> ValueEstimate {
    reward_on_batch(p, batch, antithetic, x, y, b, estimator).affine(0.0, 1.0 / p.r())
}

/// Monte-Carlo estimate of the value of stopping at `b` from `(x, y)`.
pub fn estimate_value<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    cfg: &SamplerConfig,
    estimator: RewardEstimator,
) -> Result<ValueEstimate> {
    check_point(x, y)?;
    let batch = draw_batch(p, cfg, 1.0)?;
    Ok(value_on_batch(
        p,
        &batch,
        cfg.antithetic,
        x,
        y,
        b,
        estimator,
    ))
}

/// Values at many points on one shared batch (common random numbers).
pub fn estimate_values<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    points: &[(f64, f64)],
    b: &C,
    cfg: &SamplerConfig,
    estimator: RewardEstimator,
) -> Result<Vec<ValueEstimate>> {
    for &(x, y) in points {
        check_point(x, y)?;
    }
    let batch = draw_batch(p, cfg, 1.0)?;
    Ok(points
        .par_iter()
        .map(|&(x, y)| value_on_batch(p, &batch, cfg.antithetic, x, y, b, estimator))
        .collect())
}

fn check_point(x: f64, y: f64) -> Result<()> {
    if !(x >= 0.0 && y >= 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!(
            "value needs finite x, y >= 0 (got {x}, {y})"
        )));
    }
    Ok(())
}

/// Growth constant `C` of `V <= C (x + y)`.
pub fn growth_bound(p: &ModelParams, x: f64, y: f64) -> f64 {
    p.growth_constant() * (x + y)
}

/// Sample budgets of the nested martingale check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MartingaleBudget {
    /// Simulated paths.
    pub outer: usize,
    /// Samples behind each nested value estimate.
    pub inner: usize,
}

impl Default for MartingaleBudget {
    fn default() -> Self {
        MartingaleBudget {
            outer: 2000,
            inner: 2000,
        }
    }
}

/// Martingale check at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingalePoint {
    pub horizon: f64,
    /// Estimate of `E[e^{-rt} V(Z_t) + int_0^t e^{-rs} H 1{S} ds]`; its
    /// standard error includes the nested value noise.
    pub estimate: ValueEstimate,
    /// `V(x, y)` from an independent batch of `outer * inner` samples.
    pub reference: ValueEstimate,
    pub z_score: f64,
}

/// Checks that `e^{-rt} V(Z_t) + int_0^t e^{-rs} H(Z_s) 1{S} ds` keeps the
/// expectation `V(x, y)` at each horizon, with `V` estimated under `b`.
pub fn martingale_check<C: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    b: &C,
    horizons: &[f64],
    cfg: &SamplerConfig,
    budget: MartingaleBudget,
) -> Result<Vec<MartingalePoint>> {
    martingale_check_mixed(p, x, y, b, b, horizons, cfg, budget)
}

/// As [`martingale_check`], but the nested value uses `value_b` while the
/// running reward stops at `reward_b`.
///
/// The process is a martingale for any single boundary, so a check with
/// one wrong boundary in both places cannot detect it; a mismatch between
/// the two produces a drift that grows with the horizon.
#[allow(clippy::too_many_arguments)]
pub fn martingale_check_mixed<C: BoundaryCurve + ?Sized, D: BoundaryCurve + ?Sized>(
    p: &ModelParams,
    x: f64,
    y: f64,
    value_b: &C,
    reward_b: &D,
    horizons: &[f64],
    cfg: &SamplerConfig,
    budget: MartingaleBudget,
) -> Result<Vec<MartingalePoint>> {
    check_point(x, y)?;
    cfg.validate()?;
    if budget.outer < 2 || budget.inner < 1 {
        return Err(Error::Param(format!(
            "martingale budget too small: {budget:?}"
        )));
    }
    if horizons.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Param(format!(
            "horizons must be finite and nonnegative: {horizons:?}"
        )));
    }
    let est = RewardEstimator::Auto;
    let reference_cfg = SamplerConfig {
        n_samples: budget.outer * budget.inner,
        ..cfg.reseeded(0)
    };
    let reference = estimate_value(p, x, y, value_b, &reference_cfg, est)?;

    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by(|&a, &b| horizons[a].total_cmp(&horizons[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| horizons[k]).collect();
    let path_seed = derive_seed(cfg.seed, 1);
    let inner_master = cfg.reseeded(2);

    // per path: M_t at each sorted horizon
    let per_path: Vec<Result<Vec<f64>>> = (0..budget.outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(path_seed, i);
            let zeta = -rng.sample::<f64, _>(Open01).ln() / p.r();
            let inner_cfg = SamplerConfig {
                n_samples: budget.inner,
                antithetic: false,
                ..inner_master.reseeded(i as u64)
            };
            let inner = draw_batch(p, &inner_cfg, 1.0)?;
            let (mut t, mut xt, mut yt) = (0.0, x, y);
            let mut running = None;
            let mut out = Vec::with_capacity(sorted.len());
            for &horizon in &sorted {
                if running.is_none() && zeta < horizon {
                    advance(p, &mut rng, &mut xt, &mut yt, zeta - t);
                    t = zeta;
                    let stopped = yt >= reward_b.eval(xt);
                    running = Some(if stopped {
                        p.running_reward(xt, yt) / p.r()
                    } else {
                        0.0
                    });
                }
                advance(p, &mut rng, &mut xt, &mut yt, horizon - t);
                t = horizon;
                let v = value_on_batch(p, &inner, false, xt, yt, value_b, est).mean;
                out.push((-p.r() * horizon).exp() * v + running.unwrap_or(0.0));
            }
            Ok(out)
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;

    let mut points = vec![None; horizons.len()];
    for (k, &orig) in order.iter().enumerate() {
        let horizon = sorted[k];
        let point = if horizon == 0.0 {
            MartingalePoint {
                horizon,
                estimate: reference,
                reference,
                z_score: 0.0,
            }
        } else {
            let values: Vec<f64> = per_path.iter().map(|m| m[k]).collect();
            let estimate = mean_and_se(&values, false);
            MartingalePoint {
                horizon,
                estimate,
                reference,
                z_score: estimate.z_score(&reference),
            }
        };
        points[orig] = Some(point);
    }
    Ok(points
        .into_iter()
        .map(|p| p.expect("every horizon is filled"))
        .collect())
}

fn advance<R: Rng>(p: &ModelParams, rng: &mut R, x: &mut f64, y: &mut f64, dt: f64) {
    if dt <= 0.0 {
        return;
    }
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    *x = gbm_step(*x, p.alpha1(), p.sigma1(), dt, z1);
    *y = gbm_step(*y, p.alpha2(), p.sigma2(), dt, z2);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{initial_parabola, ConstantBoundary};
    use crate::closed_form::{v1, x_star};
    use crate::model::fig1_preset;

    #[test]
    fn zero_boundary_gives_payoff() {
        let p = fig1_preset();
        let cfg = SamplerConfig::new(100_000, 3);
        for (x, y) in [(20.0, 10.0), (60.0, 40.0)] {
            let e = estimate_value(
                &p,
                x,
                y,
                &ConstantBoundary(0.0),
                &cfg,
                RewardEstimator::Direct,
            )
            .unwrap();
            assert!((e.mean - p.payoff(x, y)).abs() < 3.0 * e.std_error, "{e:?}");
        }
    }

    #[test]
    fn x_axis_value_matches_closed_form() {
        let p = fig1_preset();
        let b = initial_parabola(&p, 40);
        let cfg = SamplerConfig::new(100_000, 5);
        for x in [20.0, 60.0, 90.0] {
            let e = estimate_value(&p, x, 0.0, &b, &cfg, RewardEstimator::Auto).unwrap();
            assert!(
                (e.mean - v1(&p, x)).abs() < 3.0 * e.std_error + 1e-9,
                "x={x}: {e:?} vs {}",
                v1(&p, x)
            );
        }
    }

    #[test]
    fn direct_estimator_is_monotone_under_common_numbers() {
        let p = fig1_preset();
        let b = initial_parabola(&p, 40);
        let cfg = SamplerConfig::new(20_000, 8);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|k| (8.0 * k as f64, 20.0))
            .chain((0..12).map(|k| (30.0, 5.0 * k as f64)))
            .collect();
        let v = estimate_values(&p, &pts, &b, &cfg, RewardEstimator::Direct).unwrap();
        for k in 1..12 {
            assert!(v[k].mean >= v[k - 1].mean, "x-direction at {k}");
            assert!(v[12 + k].mean >= v[12 + k - 1].mean, "y-direction at {k}");
        }
    }

    #[test]
    fn martingale_at_time_zero_is_exact() {
        let p = fig1_preset();
        let b = initial_parabola(&p, 20);
        let budget = MartingaleBudget {
            outer: 50,
            inner: 50,
        };
        let pts = martingale_check(
            &p,
            40.0,
            20.0,
            &b,
            &[0.0, 1.0],
            &SamplerConfig::new(1, 2),
            budget,
        )
        .unwrap();
        assert_eq!(pts[0].z_score, 0.0);
        assert_eq!(pts[1].horizon, 1.0);
        assert!(pts[1].estimate.std_error > 0.0);
    }

    #[test]
    fn martingale_holds_for_a_consistent_boundary() {
        let p = fig1_preset();
        let b = initial_parabola(&p, 40);
        let budget = MartingaleBudget {
            outer: 1000,
            inner: 1000,
        };
        let pts = martingale_check(
            &p,
            40.0,
            20.0,
            &b,
            &[5.0, 1.0],
            &SamplerConfig::new(1, 6),
            budget,
        )
        .unwrap();
        assert_eq!(pts[0].horizon, 5.0);
        for pt in pts {
            assert!(pt.z_score.abs() < 4.0, "{pt:?}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = fig1_preset();
        let b = ConstantBoundary(1.0);
        assert!(estimate_value(
            &p,
            -1.0,
            0.0,
            &b,
            &SamplerConfig::default(),
            RewardEstimator::Auto
        )
        .is_err());
        let budget = MartingaleBudget { outer: 1, inner: 1 };
        assert!(
            martingale_check(&p, 1.0, 1.0, &b, &[1.0], &SamplerConfig::default(), budget).is_err()
        );
        assert!(martingale_check(
            &p,
            1.0,
            1.0,
            &b,
            &[-1.0],
            &SamplerConfig::default(),
            MartingaleBudget::default()
        )
        .is_err());
        assert!(growth_bound(&p, 1.0, 1.0) > 0.0 && x_star(&p) > 0.0);
    }
}
