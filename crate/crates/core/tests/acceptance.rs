//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned below.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stopbound::boundary::{
    initial_line, initial_parabola, psi, solve, solve_from, Boundary, ConstantBoundary,
    InvariantTolerance, RewardEstimator, SolverSettings,
};
use stopbound::closed_form::{positive_root, v1, x_axis, x_star, y_axis, y_star};
use stopbound::io::{compare_boundaries, sha256_file, CompareTolerance};
use stopbound::model::{fig1_preset, fig2_preset, fig3_preset, ModelParams, Param};
use stopbound::pde::{axis_observed_order, solve_vi, PdeConfig};
use stopbound::quadrature::{psi_quadrature, QuadConfig};
use stopbound::sampler::SamplerConfig;
use stopbound::statics::{run_sweep, value_monotonicity_check, SweepSpec};
use stopbound::value::{
    estimate_values, growth_bound, martingale_check, martingale_check_mixed, MartingaleBudget,
};

const N: usize = 100_000;
const SEED: u64 = 20240611;
const ANCHOR_REL: f64 = 1e-9;
// The quoted beta1 = 2.26239 is off in the fifth decimal (the root is
// 2.2623626...), so quoted values are matched to 1.5e-5 relative.
const QUOTED_REL: f64 = 1.5e-5;
const Z_MAX: f64 = 3.0;
const Z_EXCURSION: f64 = 4.0;
const RESIDUAL_SE_MULT: f64 = 4.0;
const SOLVE_TOL_FRAC: f64 = 0.005;
// Common-batch iteration contracts by roughly 0.85 per step near the middle
// of the curve, so both starts need a stopping tolerance well below the SE.
const UNIQUENESS_TOL_FRAC: f64 = 2e-5;
const ORACLE_REL: f64 = 0.05;
const ORACLE_RANGE: f64 = 0.8;
const MIN_ORDER: f64 = 1.8;
const HORIZONS: [f64; 2] = [1.0, 5.0];

type Outcome = stopbound::Result<(bool, String)>;
type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("closed-form anchors", closed_form_anchors),
        ("degenerate boundaries", degenerate_boundaries),
        ("Monte Carlo vs quadrature", mc_vs_quadrature),
        ("fixed point on every preset", fixed_point),
        ("uniqueness from two starts", uniqueness),
        (
            "agreement with the finite-difference oracle",
            oracle_agreement,
        ),
        ("value-function properties", value_properties),
        ("comparative statics", comparative_statics),
        ("determinism of solve", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {}: {} {name} [{:.1}s] {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

/// Root of `sigma^2/2 b(b-1) + alpha b - r` on `[1, 10]` by plain bisection.
fn bisect_root(alpha: f64, sigma: f64, r: f64) -> f64 {
    let q = |b: f64| 0.5 * sigma * sigma * b * (b - 1.0) + alpha * b - r;
    let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if q(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn closed_form_anchors() -> Outcome {
    let p2 = fig2_preset();
    let eta = y_axis(&p2).beta1;
    let ys = y_star(&p2);
    let eta_ok = (eta - 2.0).abs() <= 4.0 * f64::EPSILON;
    let ys_ok = (ys - 56.0).abs() <= 4.0 * f64::EPSILON * 56.0;

    let p1 = fig1_preset();
    let beta = bisect_root(p1.alpha1(), p1.sigma1(), p1.r());
    let xs_oracle = beta / (beta - 1.0) * (p1.r() - p1.alpha1()) * p1.cost() / p1.q1();
    let beta_lib = positive_root(p1.alpha1(), p1.sigma1(), p1.r())?;
    let beta_ok = ((beta_lib - beta) / beta).abs() <= ANCHOR_REL
        && ((beta - 2.26239) / beta).abs() < QUOTED_REL;
    let xs_ok = ((x_star(&p1) - xs_oracle) / xs_oracle).abs() <= ANCHOR_REL
        && ((xs_oracle - 100.36) / xs_oracle).abs() < QUOTED_REL;
    Ok((
        eta_ok && ys_ok && beta_ok && xs_ok,
        format!(
            "eta1 = {eta}, y* = {ys}, beta1 = {beta_lib:.10} (bisection {beta:.10}), x* = {:.10} (bisection {xs_oracle:.10})",
            x_star(&p1)
        ),
    ))
}

fn random_points(seed: u64, n: usize, x_hi: f64, y_hi: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(0.0..x_hi), rng.random_range(0.0..y_hi)))
        .collect()
}

fn degenerate_boundaries() -> Outcome {
    let p = fig1_preset();
    let cfg = SamplerConfig::new(N, SEED);
    let points = random_points(SEED, 20, 1.5 * x_star(&p), 1.5 * y_star(&p));
    let mut worst_z: f64 = 0.0;
    let mut zero_ok = true;
    let mut inf_ok = true;
    for &(x, y) in &points {
        let direct = psi(
            &p,
            x,
            y,
            &ConstantBoundary(0.0),
            &cfg,
            RewardEstimator::Direct,
        )?;
        let z = (direct.mean - y).abs() / direct.std_error;
        worst_z = worst_z.max(z);
        zero_ok &= z <= Z_MAX;
        let comp = psi(
            &p,
            x,
            y,
            &ConstantBoundary(0.0),
            &cfg,
            RewardEstimator::Auto,
        )?;
        zero_ok &= comp.std_error == 0.0 && (comp.mean - y).abs() <= 1e-12 * y.max(1.0);
        let inf = psi(
            &p,
            x,
            y,
            &ConstantBoundary(f64::INFINITY),
            &cfg,
            RewardEstimator::Auto,
        )?;
        inf_ok &= inf.std_error == 0.0
            && (inf.mean - p.indifference(x)).abs() <= 1e-12 * p.indifference(x).abs().max(1.0);
    }
    Ok((
        zero_ok && inf_ok,
        format!("b = 0: worst |z| {worst_z:.2} (direct), complement exact; b = inf: exact f(x) with zero SE: {inf_ok}"),
    ))
}

fn mc_vs_quadrature() -> Outcome {
    let p = fig1_preset();
    let b = initial_parabola(&p, 40);
    let cfg = SamplerConfig::new(N, SEED);
    let q = QuadConfig::for_params(&p);
    let xs = x_star(&p);
    let mut zs = Vec::new();
    for k in 1..=10 {
        let x = xs * k as f64 / 11.0;
        let y = b.value_at(x);
        let mc = psi(&p, x, y, &b, &cfg, RewardEstimator::Auto)?;
        let quad = psi_quadrature(&p, x, y, &b, &q)?;
        zs.push((mc.mean - quad.value).abs() / mc.std_error.max(quad.error_bound));
    }
    let over3 = zs.iter().filter(|&&z| z > Z_MAX).count();
    let over4 = zs.iter().filter(|&&z| z > Z_EXCURSION).count();
    let zs_text: Vec<String> = zs.iter().map(|z| format!("{z:.2}")).collect();
    Ok((
        over3 <= 1 && over4 == 0,
        format!("|z| = [{}]", zs_text.join(", ")),
    ))
}

fn invariant_issues(p: &ModelParams, b: &Boundary, tol: f64) -> Vec<String> {
    b.check_invariants(
        p,
        &InvariantTolerance {
            value: 1e-9 * y_star(p),
            convex: tol,
        },
    )
}

fn fixed_point() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p) in [
        ("fig1", fig1_preset()),
        ("fig2", fig2_preset()),
        ("fig3", fig3_preset()),
    ] {
        let mut s = SolverSettings::for_params(&p);
        s.sampler = SamplerConfig::new(N, SEED);
        s.tol = SOLVE_TOL_FRAC * y_star(&p);
        s.max_iter = 50;
        let (b, rep) = solve(&p, &s)?;
        let limit = s.tol.max(RESIDUAL_SE_MULT * rep.residual_se);
        let issues = invariant_issues(&p, &b, s.tol);
        let ok =
            rep.converged && rep.iterations <= 50 && rep.residual <= limit && issues.is_empty();
        pass &= ok;
        parts.push(format!(
            "{name}: {} iterations, residual {:.3} <= {limit:.3}, invariants {}",
            rep.iterations,
            rep.residual,
            if issues.is_empty() {
                "ok".into()
            } else {
                issues.join("; ")
            }
        ));
    }
    Ok((pass, parts.join(" | ")))
}

fn tight_settings(p: &ModelParams) -> SolverSettings {
    let mut s = SolverSettings::for_params(p);
    s.sampler = SamplerConfig::new(N, SEED);
    s.tol = UNIQUENESS_TOL_FRAC * y_star(p);
    s.max_iter = 500;
    s
}

fn uniqueness() -> Outcome {
    let p = fig1_preset();
    let s = tight_settings(&p);
    let (a, ra) = solve_from(&p, initial_parabola(&p, s.grid_size), &s)?;
    let (b, rb) = solve_from(&p, initial_line(&p, s.grid_size), &s)?;
    let mut worst: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut pass = ra.converged && rb.converged;
    for i in 0..a.len() {
        let d = (a.bs()[i] - b.bs()[i]).abs();
        let tol = 3.0 * ra.node_se[i].hypot(rb.node_se[i]);
        gap = gap.max(d);
        if tol > 0.0 {
            worst = worst.max(d / tol * 3.0);
        }
        pass &= d <= tol || d <= 1e-12 * y_star(&p);
    }
    Ok((
        pass,
        format!(
            "{} and {} iterations, sup gap {gap:.4}, worst gap/SE {worst:.2}",
            ra.iterations, rb.iterations
        ),
    ))
}

fn oracle_agreement() -> Outcome {
    let p = fig1_preset();
    let (mc, _) = solve(&p, &tight_settings(&p))?;
    let sol = solve_vi(&p, &PdeConfig::for_params(&p))?;
    let cell = sol.dy();
    let tol = CompareTolerance {
        relative: ORACLE_REL,
        absolute: cell,
        range_fraction: ORACLE_RANGE,
    };
    let rep = compare_boundaries(&mc, mc.x_end(), &sol.boundary, sol.boundary.x_end(), &tol)?;

    let xs = x_star(&p);
    let samples: Vec<f64> = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
        .iter()
        .map(|f| f * xs)
        .collect();
    let (order, coarse, fine) =
        axis_observed_order(&p, 2.5 * xs, 100, &samples, 1.9, 1e-10 * p.cost())?;
    Ok((
        rep.pass && order >= MIN_ORDER,
        format!(
            "sup |diff| {:.3} (sup rel {:.3}, cell {cell:.3}) on [0, {:.1}]; axis error {coarse:.2e} -> {fine:.2e}, order {order:.3}",
            rep.sup_abs_diff, rep.sup_rel_diff, rep.range.1
        ),
    ))
}

/// Value of waiting for `x` to reach `a` on the x axis.
fn threshold_value(p: &ModelParams, a: f64, x: f64) -> f64 {
    let beta = x_axis(p).beta1;
    let payoff = |x: f64| p.q1() * x / p.delta1() - p.cost();
    if x >= a {
        payoff(x)
    } else {
        (x / a).powf(beta) * payoff(a)
    }
}

fn value_properties() -> Outcome {
    let p = fig1_preset();
    let s = SolverSettings {
        sampler: SamplerConfig::new(N, SEED),
        ..SolverSettings::for_params(&p)
    };
    let (b, _) = solve(&p, &s)?;
    let cfg = s.sampler.reseeded(7);

    let points = random_points(SEED ^ 7, 50, 1.5 * x_star(&p), 1.5 * y_star(&p));
    let vals = estimate_values(&p, &points, &b, &cfg, RewardEstimator::Auto)?;
    let mut bounds_ok = true;
    for (&(x, y), v) in points.iter().zip(&vals) {
        bounds_ok &= v.mean >= p.payoff(x, y).max(0.0) - 3.0 * v.std_error;
        bounds_ok &= v.mean <= growth_bound(&p, x, y) + 3.0 * v.std_error;
    }

    let xs = x_star(&p);
    let n = b.len();
    let cell = b.xs()[n - 1] - b.xs()[n - 2];
    let axis: Vec<(f64, f64)> = (1..=10)
        .map(|k| (1.2 * xs * k as f64 / 10.0, 0.0))
        .collect();
    let axis_vals = estimate_values(&p, &axis, &b, &cfg, RewardEstimator::Auto)?;
    let mut axis_ok = true;
    let mut axis_worst: f64 = 0.0;
    for (&(x, _), v) in axis.iter().zip(&axis_vals) {
        let exact = v1(&p, x);
        let margin = (threshold_value(&p, xs - cell, x) - exact).abs();
        let err = (v.mean - exact).abs();
        axis_worst = axis_worst.max(err / (3.0 * v.std_error + margin).max(f64::MIN_POSITIVE));
        axis_ok &= err <= 3.0 * v.std_error + margin;
    }

    let budget = MartingaleBudget::default();
    let mut z_consistent = Vec::new();
    for (x, y) in [(40.0, 20.0), (20.0, 30.0)] {
        for m in martingale_check(&p, x, y, &b, &HORIZONS, &cfg, budget)? {
            z_consistent.push(m.z_score);
        }
    }
    let mart_ok = z_consistent.iter().all(|z| z.abs() <= Z_MAX);

    // Power of the check: a value surface from the wrong boundary drifts away
    // from the reward accrued under the solved one.
    let wrong = b.with_values(b.bs().iter().map(|v| 2.0 * v).collect())?;
    let drift = martingale_check_mixed(&p, 40.0, 20.0, &wrong, &b, &HORIZONS, &cfg, budget)?;
    let power_ok =
        drift[1].z_score.abs() > drift[0].z_score.abs() && drift[1].z_score.abs() > Z_MAX;

    let zs: Vec<String> = z_consistent.iter().map(|z| format!("{z:.2}")).collect();
    Ok((
        bounds_ok && axis_ok && mart_ok && power_ok,
        format!(
            "bounds at 50 points {bounds_ok}; axis worst err/allowance {axis_worst:.2}; martingale z [{}] (budget {}x{}); wrong-boundary z {:.2} -> {:.2}",
            zs.join(", "),
            budget.outer,
            budget.inner,
            drift[0].z_score,
            drift[1].z_score
        ),
    ))
}

fn comparative_statics() -> Outcome {
    let sweeps = [
        (fig1_preset(), Param::Sigma2, vec![0.10, 0.15, 0.20]),
        (fig2_preset(), Param::Alpha2, vec![0.01, 0.02, 0.03]),
        (fig3_preset(), Param::R, vec![0.08, 0.10, 0.12]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (base, param, values) in sweeps {
        let mut spec = SweepSpec::new(base, param, values);
        spec.solver.sampler = SamplerConfig::new(N, SEED);
        let rep = run_sweep(&spec)?;
        pass &= rep.all_pass();
        let worst = rep
            .boundary_orderings
            .iter()
            .map(|o| o.max_violation)
            .fold(0.0, f64::max);
        parts.push(format!(
            "{}: orderings {} (worst {worst:.3}), anchors {}",
            param.name(),
            rep.all_pass(),
            rep.anchors.pass
        ));
    }
    let base = fig1_preset();
    let mut settings = SolverSettings::for_params(&base);
    settings.sampler = SamplerConfig::new(N, SEED);
    settings.tol = 0.0005 * y_star(&base);
    settings.max_iter = 200;
    let probe = [(40.0, 20.0)];
    for (param, lo, hi) in [
        (Param::Sigma1, 0.15, 0.25),
        (Param::Alpha1, 0.02, 0.03),
        (Param::Sigma2, 0.15, 0.20),
        (Param::Alpha2, 0.02, 0.03),
    ] {
        let v = value_monotonicity_check(&base, param, lo, hi, &probe, &settings)?;
        pass &= v.pass;
        parts.push(format!("value in {}: {}", param.name(), v.pass));
    }
    Ok((pass, parts.join(" | ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/fig1.cfg");
    let run = |name: &str| -> stopbound::Result<(bool, String)> {
        let out = dir.path().join(name).join("boundary.csv");
        let status = Command::new(env!("CARGO_BIN_EXE_stopbound"))
            .arg("solve")
            .arg("--config")
            .arg(&config)
            .args(["--samples", "20000", "--seed", "11", "--out"])
            .arg(&out)
            .output()?;
        Ok((status.status.success(), sha256_file(&out)?))
    };
    let (ok_a, hash_a) = run("a")?;
    let (ok_b, hash_b) = run("b")?;
    Ok((
        ok_a && ok_b && hash_a == hash_b,
        format!("sha256 {} vs {}", &hash_a[..16], &hash_b[..16]),
    ))
}
