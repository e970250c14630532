//! Closed-form thresholds on the two axes for the three bundled parameter sets.

use stopbound::closed_form::{v1, v2, x_axis, y_axis};
use stopbound::model::{fig1_preset, fig2_preset, fig3_preset};

fn main() {
    for (name, p) in [
        ("fig1", fig1_preset()),
        ("fig2", fig2_preset()),
        ("fig3", fig3_preset()),
    ] {
        let (xa, ya) = (x_axis(&p), y_axis(&p));
        println!(
            "{name}: x* = {:.6} (beta {:.6}), y* = {:.6} (beta {:.6}), lambda = {}",
            xa.threshold,
            xa.beta1,
            ya.threshold,
            ya.beta1,
            p.lambda()
        );
        println!(
            "  V1(x*/2) = {:.4}, V2(y*/2) = {:.4}",
            v1(&p, xa.threshold / 2.0),
            v2(&p, ya.threshold / 2.0)
        );
    }
}
