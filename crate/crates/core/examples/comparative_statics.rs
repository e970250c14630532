//! Boundary ordering as the volatility of the second product rises.

use stopbound::model::{fig1_preset, Param};
use stopbound::statics::{run_sweep, SweepSpec};

fn main() -> stopbound::Result<()> {
    let spec = SweepSpec::new(fig1_preset(), Param::Sigma2, vec![0.10, 0.15, 0.20]);
    let report = run_sweep(&spec)?;
    for e in &report.entries {
        println!(
            "sigma2 = {:.2}: y* = {:.3}, probe value {:?}",
            e.value,
            e.y_star,
            e.probe_value.map(|v| v.mean)
        );
    }
    for o in &report.boundary_orderings {
        println!(
            "  {} -> {}: max violation {:.4} ({})",
            o.lo_value,
            o.hi_value,
            o.max_violation,
            if o.pass { "ok" } else { "violated" }
        );
    }
    println!("all checks pass: {}", report.all_pass());
    Ok(())
}
