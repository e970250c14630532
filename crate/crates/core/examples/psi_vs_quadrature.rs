//! Monte-Carlo Psi against the deterministic nested quadrature on a parabolic boundary.

use stopbound::boundary::{initial_parabola, psi, RewardEstimator};
use stopbound::model::fig1_preset;
use stopbound::quadrature::{psi_quadrature, QuadConfig};
use stopbound::sampler::SamplerConfig;

fn main() -> stopbound::Result<()> {
    let p = fig1_preset();
    let b = initial_parabola(&p, 40);
    let cfg = SamplerConfig::new(200_000, 7);
    let q = QuadConfig::for_params(&p);
    println!(
        "{:>6} {:>6} {:>12} {:>9} {:>12} {:>7}",
        "x", "y", "mc", "se", "quad", "z"
    );
    for (x, y) in [
        (5.0, 50.0),
        (20.0, 35.0),
        (50.0, 20.0),
        (80.0, 5.0),
        (90.0, 30.0),
    ] {
        let mc = psi(&p, x, y, &b, &cfg, RewardEstimator::Auto)?;
        let quad = psi_quadrature(&p, x, y, &b, &q)?;
        let z = (mc.mean - quad.value) / mc.std_error;
        println!(
            "{x:>6.1} {y:>6.1} {:>12.5} {:>9.5} {:>12.5} {z:>7.2}",
            mc.mean, mc.std_error, quad.value
        );
    }
    Ok(())
}
