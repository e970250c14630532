//! Obstacle-problem solve on a truncated grid, plus the second-order check on the x axis.

use stopbound::closed_form::x_star;
use stopbound::model::fig1_preset;
use stopbound::pde::{axis_observed_order, solve_vi, PdeConfig};

fn main() -> stopbound::Result<()> {
    let p = fig1_preset();
    let cfg = PdeConfig::for_params(&p);
    let sol = solve_vi(&p, &cfg)?;
    println!(
        "{}x{} grid: {} sweeps, max residual {:.2e}",
        cfg.nx, cfg.ny, sol.sweeps, sol.max_residual
    );
    for x in [0.0, 20.0, 40.0, 60.0, 80.0] {
        println!("  b({x:>4.1}) = {:.3}", sol.boundary.value_at(x));
    }

    let xs = x_star(&p);
    let samples: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95]
        .iter()
        .map(|f| f * xs)
        .collect();
    let (order, coarse, fine) =
        axis_observed_order(&p, 2.5 * xs, 100, &samples, 1.9, 1e-10 * p.cost())?;
    println!("axis errors {coarse:.3e} -> {fine:.3e}, observed order {order:.3}");
    Ok(())
}
