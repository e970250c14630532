//! Value estimates under a solved boundary and the discounted-martingale check along simulated paths.

use stopbound::boundary::{solve, RewardEstimator, SolverSettings};
use stopbound::model::fig1_preset;
use stopbound::value::{estimate_values, growth_bound, martingale_check, MartingaleBudget};

fn main() -> stopbound::Result<()> {
    let p = fig1_preset();
    let settings = SolverSettings::for_params(&p);
    let (b, _) = solve(&p, &settings)?;

    let points = [(10.0, 10.0), (40.0, 20.0), (60.0, 10.0), (20.0, 40.0)];
    let values = estimate_values(&p, &points, &b, &settings.sampler, RewardEstimator::Auto)?;
    for ((x, y), v) in points.iter().zip(&values) {
        println!(
            "V({x}, {y}) = {:.3} +- {:.3}   payoff {:.3}   bound {:.1}",
            v.mean,
            v.std_error,
            p.payoff(*x, *y).max(0.0),
            growth_bound(&p, *x, *y)
        );
    }

    let budget = MartingaleBudget {
        outer: 1000,
        inner: 1000,
    };
    for m in martingale_check(&p, 40.0, 20.0, &b, &[1.0, 5.0], &settings.sampler, budget)? {
        println!(
            "t = {}: E[M_t] = {:.3} vs V = {:.3}, z = {:.2}",
            m.horizon, m.estimate.mean, m.reference.mean, m.z_score
        );
    }
    Ok(())
}
