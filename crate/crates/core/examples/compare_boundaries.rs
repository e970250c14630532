//! Monte-Carlo boundary against the finite-difference boundary on the left part of the x range.

use stopbound::boundary::{solve, SolverSettings};
use stopbound::closed_form::y_star;
use stopbound::io::{compare_boundaries, CompareTolerance};
use stopbound::model::fig1_preset;
use stopbound::pde::{solve_vi, PdeConfig};

fn main() -> stopbound::Result<()> {
    let p = fig1_preset();
    let mut settings = SolverSettings::for_params(&p);
    settings.tol = 0.0005 * y_star(&p);
    settings.max_iter = 200;
    let (mc, _) = solve(&p, &settings)?;
    let pde = solve_vi(&p, &PdeConfig::for_params(&p))?;

    let tol = CompareTolerance {
        range_fraction: 0.8,
        ..CompareTolerance::default()
    };
    let rep = compare_boundaries(&mc, mc.x_end(), &pde.boundary, pde.boundary.x_end(), &tol)?;
    println!(
        "on [0, {:.1}]: sup |diff| {:.3}, sup relative {:.3}, worst at x = {:.2}, pass {}",
        rep.range.1, rep.sup_abs_diff, rep.sup_rel_diff, rep.worst_x, rep.pass
    );
    Ok(())
}
