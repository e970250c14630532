use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use stopbound::boundary::{
    psi_on_batch, solve, BatchPolicy, Boundary, RewardEstimator, SolverSettings,
};
use stopbound::closed_form::{x_axis, x_star, y_axis, y_star};
use stopbound::io::{
    compare_boundaries, format_sig12, parse_boundary_csv, parse_points_csv, write_boundary_csv,
    CompareTolerance, RunManifest,
};
use stopbound::model::{fig1_preset, ModelParams, Param};
use stopbound::pde::{extract_boundary, solve_vi, PdeConfig};
use stopbound::quadrature::{psi_quadrature, QuadConfig};
use stopbound::sampler::{draw_batch, SamplerConfig};
use stopbound::statics::{run_sweep, SweepSpec};
use stopbound::value::estimate_value;

#[derive(Parser)]
#[command(
    name = "stopbound",
    version,
    about = "Optimal investment boundary solver and oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form one-dimensional thresholds and constants as JSON.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Monte-Carlo fixed-point solve of the boundary.
    Solve(SolveArgs),
    /// Monte-Carlo value at one point under a boundary, as JSON.
    Value {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "auto")]
        estimator: RewardEstimator,
    },
    /// Monte-Carlo Psi against nested quadrature at the given points (CSV on stdout).
    CheckPsi {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "auto")]
        estimator: RewardEstimator,
    },
    /// Finite-difference obstacle-problem solve and boundary extraction.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 250.0)]
        xmax: f64,
        #[arg(long, default_value_t = 150.0)]
        ymax: f64,
        #[arg(long, default_value_t = 200)]
        nx: usize,
        #[arg(long, default_value_t = 200)]
        ny: usize,
        #[arg(long, default_value_t = 1.9)]
        omega: f64,
        /// Largest node update at convergence; defaults to 1e-9 I.
        #[arg(long)]
        psor_tol: Option<f64>,
        /// Contact tolerance for boundary extraction; defaults to 1e-6 I.
        #[arg(long)]
        contact_tol: Option<f64>,
        #[arg(long, default_value_t = 200_000)]
        max_sweeps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Comparative-statics sweep over one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: Param,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `plot_data.csv` with columns `param_value,x,b`.
        #[arg(long)]
        plot_data: bool,
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to 0.0005 y* of the base parameters.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Compares two boundary CSVs; prints a JSON report.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        rel_tol: f64,
        #[arg(long, default_value_t = 0.0)]
        abs_tol: f64,
        /// Compare on `[0, fraction * min(x_end)]`.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        /// Exit with status 1 when the comparison fails.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 40)]
    grid: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sup-norm stopping tolerance; defaults to 0.005 y*.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    relaxation: f64,
    #[arg(long)]
    antithetic: bool,
    /// Draw a new batch every iteration instead of reusing one.
    #[arg(long)]
    fresh_batches: bool,
    #[arg(long, default_value = "auto")]
    estimator: RewardEstimator,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("STOPBOUND_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("STOPBOUND_THREADS must be a count, got '{raw}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn read_text(path: &Path) -> stopbound::Result<String> {
    fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_boundary(path: &Path) -> stopbound::Result<Boundary> {
    parse_boundary_csv(&read_text(path)?, path)
}

fn load_config(path: &Path) -> stopbound::Result<(ModelParams, String)> {
    let text = read_text(path)?;
    Ok((ModelParams::from_config_str(&text, path)?, text))
}

fn out_dir(path: &Path) -> stopbound::Result<PathBuf> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn run(command: Command) -> stopbound::Result<ExitCode> {
    match command {
        Command::Benchmark { config } => {
            let p = match config {
                Some(path) => load_config(&path)?.0,
                None => fig1_preset(),
            };
            let out = json!({
                "params": p,
                "x_axis": x_axis(&p),
                "y_axis": y_axis(&p),
                "x_star": x_star(&p),
                "y_star": y_star(&p),
                "lambda": p.lambda(),
                "indifference_at_0": p.indifference(0.0),
                "kill_line_at_0": p.kill_line(0.0),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Solve(a) => {
            let (p, text) = load_config(&a.config)?;
            let settings = SolverSettings {
                grid_size: a.grid,
                sampler: SamplerConfig {
                    n_samples: a.samples,
                    seed: a.seed,
                    antithetic: a.antithetic,
                },
                tol: a.tol.unwrap_or(0.005 * y_star(&p)),
                max_iter: a.max_iter,
                relaxation: a.relaxation,
                batches: if a.fresh_batches {
                    BatchPolicy::FreshPerIteration
                } else {
                    BatchPolicy::Common
                },
                estimator: a.estimator,
            };
            let t = Instant::now();
            let (b, report) = solve(&p, &settings)?;
            let solve_ms = ms(t);
            let dir = out_dir(&a.out)?;
            write_boundary_csv(&a.out, &b)?;
            let report_path = a.out.with_extension("report.json");
            fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
            let mut m = RunManifest::new("solve", text, Some(a.seed));
            m.flag("grid", a.grid)
                .flag("samples", a.samples)
                .flag("seed", a.seed)
                .flag("tol", settings.tol)
                .flag("max_iter", a.max_iter)
                .flag("relaxation", a.relaxation)
                .flag("antithetic", a.antithetic)
                .flag("fresh_batches", a.fresh_batches)
                .flag("estimator", format!("{:?}", a.estimator).to_lowercase());
            m.add_artifact(&a.out)?;
            m.add_artifact(&report_path)?;
            m.timings_ms.insert("solve".into(), solve_ms);
            m.write(&dir)?;
            if !report.converged {
                eprintln!(
                    "warning: not converged after {} iterations (last change {})",
                    report.iterations,
                    report
                        .sup_change_history
                        .last()
                        .copied()
                        .unwrap_or(f64::NAN)
                );
            }
            eprintln!(
                "iterations {}, residual {} (se {})",
                report.iterations, report.residual, report.residual_se
            );
        }
        Command::Value {
            config,
            boundary,
            x,
            y,
            samples,
            seed,
            estimator,
        } => {
            let (p, _) = load_config(&config)?;
            let b = load_boundary(&boundary)?;
            let e = estimate_value(&p, x, y, &b, &SamplerConfig::new(samples, seed), estimator)?;
            println!("{}", serde_json::to_string(&e)?);
        }
        Command::CheckPsi {
            config,
            boundary,
            points,
            samples,
            seed,
            estimator,
        } => {
            let (p, _) = load_config(&config)?;
            let b = load_boundary(&boundary)?;
            let pts = parse_points_csv(&read_text(&points)?, &points)?;
            let batch = draw_batch(&p, &SamplerConfig::new(samples, seed), 1.0)?;
            let q = QuadConfig::for_params(&p);
            let rows: Vec<stopbound::Result<String>> = pts
                .par_iter()
                .map(|&(x, y)| {
                    let mc = psi_on_batch(&p, &batch, false, x, y, &b, estimator);
                    let quad = psi_quadrature(&p, x, y, &b, &q)?;
                    let z = if mc.std_error > 0.0 {
                        (mc.mean - quad.value) / mc.std_error
                    } else {
                        0.0
                    };
                    Ok([x, y, mc.mean, mc.std_error, quad.value, z]
                        .map(format_sig12)
                        .join(","))
                })
                .collect();
            let mut out = String::from("x,y,mc_estimate,mc_se,quadrature,z_score\n");
            for row in rows {
                let _ = writeln!(out, "{}", row?);
            }
            print!("{out}");
        }
        Command::Oracle {
            config,
            xmax,
            ymax,
            nx,
            ny,
            omega,
            psor_tol,
            contact_tol,
            max_sweeps,
            out,
        } => {
            let (p, text) = load_config(&config)?;
            let cfg = PdeConfig {
                x_max: xmax,
                y_max: ymax,
                nx,
                ny,
                omega,
                psor_tol: psor_tol.unwrap_or(1e-9 * p.cost()),
                max_sweeps,
            };
            let t = Instant::now();
            let sol = solve_vi(&p, &cfg)?;
            let b = match contact_tol {
                Some(tol) => extract_boundary(&sol, &p, tol)?,
                None => sol.boundary.clone(),
            };
            let solve_ms = ms(t);
            let dir = out_dir(&out)?;
            write_boundary_csv(&out, &b)?;
            let report_path = out.with_extension("report.json");
            let report = json!({
                "config": cfg,
                "sweeps": sol.sweeps,
                "max_residual": sol.max_residual,
                "dx": sol.dx(),
                "dy": sol.dy(),
            });
            fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
            let mut m = RunManifest::new("oracle", text, None);
            m.flag("xmax", xmax)
                .flag("ymax", ymax)
                .flag("nx", nx)
                .flag("ny", ny)
                .flag("omega", omega);
            m.flag("psor_tol", cfg.psor_tol)
                .flag("max_sweeps", max_sweeps);
            m.flag("contact_tol", contact_tol.unwrap_or(1e-6 * p.cost()));
            m.add_artifact(&out)?;
            m.add_artifact(&report_path)?;
            m.timings_ms.insert("solve".into(), solve_ms);
            m.write(&dir)?;
            eprintln!("sweeps {}, max residual {:e}", sol.sweeps, sol.max_residual);
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            plot_data,
            grid,
            samples,
            seed,
            tol,
            max_iter,
        } => {
            let (base, text) = load_config(&config)?;
            let mut spec = SweepSpec::new(base, param, values.clone());
            spec.solver.grid_size = grid;
            spec.solver.sampler = SamplerConfig::new(samples, seed);
            if let Some(tol) = tol {
                spec.solver.tol = tol;
            }
            spec.solver.max_iter = max_iter;
            let t = Instant::now();
            let report = run_sweep(&spec)?;
            let sweep_ms = ms(t);
            fs::create_dir_all(&out)?;
            let mut m = RunManifest::new("sweep", text, Some(seed));
            m.flag("param", param.name()).flag(
                "values",
                values
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            m.flag("grid", grid)
                .flag("samples", samples)
                .flag("seed", seed)
                .flag("tol", spec.solver.tol);
            m.flag("max_iter", max_iter).flag("plot_data", plot_data);
            let mut long = String::from("param_value,x,b\n");
            for e in &report.entries {
                let Some(b) = &e.boundary else {
                    eprintln!(
                        "warning: {} = {} failed: {}",
                        param,
                        e.value,
                        e.error.as_deref().unwrap_or("unknown")
                    );
                    continue;
                };
                let path = out.join(format!("boundary_{}.csv", e.value));
                write_boundary_csv(&path, b)?;
                m.add_artifact(&path)?;
                for (x, v) in b.xs().iter().zip(b.bs()) {
                    let _ = writeln!(
                        long,
                        "{},{},{}",
                        e.value,
                        format_sig12(*x),
                        format_sig12(*v)
                    );
                }
            }
            let report_path = out.join("sweep_report.json");
            fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
            m.add_artifact(&report_path)?;
            if plot_data {
                let path = out.join("plot_data.csv");
                fs::write(&path, long)?;
                m.add_artifact(&path)?;
            }
            m.timings_ms.insert("sweep".into(), sweep_ms);
            m.write(&out)?;
            eprintln!(
                "{} sweep: {}",
                param,
                if report.all_pass() {
                    "all orderings hold"
                } else {
                    "ordering violations, see sweep_report.json"
                }
            );
        }
        Command::Compare {
            a,
            b,
            rel_tol,
            abs_tol,
            fraction,
            strict,
        } => {
            let (ba, bb) = (load_boundary(&a)?, load_boundary(&b)?);
            let tol = CompareTolerance {
                relative: rel_tol,
                absolute: abs_tol,
                range_fraction: fraction,
            };
            let rep = compare_boundaries(&ba, ba.x_end(), &bb, bb.x_end(), &tol)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            if strict && !rep.pass {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
