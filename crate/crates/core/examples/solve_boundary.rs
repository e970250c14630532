//! Fixed-point iteration from the parabola and from the straight line; both land on the same curve.

use stopbound::boundary::{
    initial_line, initial_parabola, solve_from, InvariantTolerance, SolverSettings,
};
use stopbound::closed_form::y_star;
use stopbound::model::fig1_preset;

fn main() -> stopbound::Result<()> {
    let p = fig1_preset();
    let mut settings = SolverSettings::for_params(&p);
    settings.tol = 0.0005 * y_star(&p);
    settings.max_iter = 200;

    let (a, rep_a) = solve_from(&p, initial_parabola(&p, settings.grid_size), &settings)?;
    let (b, rep_b) = solve_from(&p, initial_line(&p, settings.grid_size), &settings)?;
    println!(
        "parabola start: {} iterations, residual {:.4}",
        rep_a.iterations, rep_a.residual
    );
    println!(
        "line start:     {} iterations, residual {:.4}",
        rep_b.iterations, rep_b.residual
    );

    let gap = a
        .bs()
        .iter()
        .zip(b.bs())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    println!("sup gap between the two limits: {gap:.4}");

    let tol = InvariantTolerance {
        value: settings.tol,
        convex: settings.tol,
    };
    let issues = a.check_invariants(&p, &tol);
    println!(
        "invariant issues: {}",
        if issues.is_empty() {
            "none".to_string()
        } else {
            issues.join("; ")
        }
    );
    for x in [0.0, 20.0, 40.0, 60.0, 80.0, 100.0] {
        println!("  b({x:>5.1}) = {:.3}", a.value_at(x));
    }
    Ok(())
}
