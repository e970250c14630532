//! Comparative statics: boundary and value sweeps over one model parameter.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{solve, Boundary, SolveReport, SolverSettings};
use crate::closed_form::{x_star, y_star};
use crate::error::{Error, Result};
use crate::estimate::ValueEstimate;
use crate::model::{ModelParams, Param};
use crate::sampler::draw_batch;
use crate::value::value_on_batch;

/// Direction in which a quantity moves as the swept parameter increases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
    /// No ordering is asserted.
    Unspecified,
}

impl Direction {
    fn holds(self, lo: f64, hi: f64, tol: f64) -> bool {
        match self {
            Direction::Nondecreasing => hi >= lo - tol,
            Direction::Nonincreasing => hi <= lo + tol,
            Direction::Unspecified => true,
        }
    }

    /// Amount by which `(lo, hi)` breaks the ordering (0 if it holds).
    fn violation(self, lo: f64, hi: f64) -> f64 {
        match self {
            Direction::Nondecreasing => (lo - hi).max(0.0),
            Direction::Nonincreasing => (hi - lo).max(0.0),
            Direction::Unspecified => 0.0,
        }
    }
}

/// Expected movement of the optimal boundary when `param` increases.
pub fn boundary_direction(param: Param) -> Direction {
    match param {
        // the value grows while the payoff does not depend on the volatilities
        Param::Sigma1 | Param::Sigma2 => Direction::Nondecreasing,
        Param::Alpha2 => Direction::Nonincreasing,
        Param::R => Direction::Nondecreasing,
        Param::Alpha1 => Direction::Unspecified,
    }
}

/// Expected movement of the value function when `param` increases.
pub fn value_direction(param: Param) -> Direction {
    match param {
        Param::R => Direction::Nonincreasing,
        _ => Direction::Nondecreasing,
    }
}

/// A one-parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub parameter: Param,
    /// Strictly increasing parameter values.
    pub values: Vec<f64>,
    pub base: ModelParams,
    /// Shared by every entry; the sampler seed is the master seed.
    pub solver: SolverSettings,
    /// Value probe; defaults to `(0.4 x*, 0.4 y*)` of the base parameters.
    pub probe: Option<(f64, f64)>,
}

impl SweepSpec {
    /// Sweep with solver tolerance `0.0005 y*` of the base parameters.
    pub fn new(base: ModelParams, parameter: Param, values: Vec<f64>) -> Self {
        let mut solver = SolverSettings::for_params(&base);
        solver.tol = 0.0005 * y_star(&base);
        solver.max_iter = 200;
        SweepSpec {
            parameter,
            values,
            base,
            solver,
            probe: None,
        }
    }

    pub fn probe_point(&self) -> (f64, f64) {
        self.probe
            .unwrap_or((0.4 * x_star(&self.base), 0.4 * y_star(&self.base)))
    }

    /// Checks the value list and builds the parameter set of every entry.
    pub fn entry_params(&self) -> Result<Vec<ModelParams>> {
        if self.values.is_empty() {
            return Err(Error::Param("a sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Param(format!(
                "sweep values must be strictly increasing: {:?}",
                self.values
            )));
        }
        self.solver.validate()?;
        self.values
            .iter()
            .map(|&v| self.base.with(self.parameter, v))
            .collect()
    }
}

/// Result for one parameter value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub params: ModelParams,
    pub x_star: f64,
    pub y_star: f64,
    pub boundary: Option<Boundary>,
    pub report: Option<SolveReport>,
    pub probe_value: Option<ValueEstimate>,
    pub error: Option<String>,
}

/// Ordering verdict between two adjacent entries.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingVerdict {
    pub lo_value: f64,
    pub hi_value: f64,
    pub expected: Direction,
    /// Largest ordering violation on the overlap `[0, min x*]`.
    pub max_violation: f64,
    /// Where the largest violation relative to its tolerance occurs.
    pub worst_x: f64,
    /// `3 sqrt(se_lo^2 + se_hi^2)` at `worst_x`.
    pub tolerance_at_worst: f64,
    pub pass: bool,
}

/// Anchor behaviour across the sweep, from closed forms.
#[derive(Debug, Clone, Serialize)]
pub struct AnchorVerdict {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub description: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub parameter: Param,
    pub probe: (f64, f64),
    pub entries: Vec<SweepEntry>,
    pub boundary_orderings: Vec<OrderingVerdict>,
    pub value_orderings: Vec<OrderingVerdict>,
    pub anchors: AnchorVerdict,
}

impl SweepReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.error.is_none())
            && self.boundary_orderings.iter().all(|v| v.pass)
            && self.value_orderings.iter().all(|v| v.pass)
            && self.anchors.pass
    }
}

/// Solves every entry (concurrently) and grades the orderings.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let params = spec.entry_params()?;
    let probe = spec.probe_point();
    let probe_cfg = spec.solver.sampler.reseeded(u64::MAX - 1);
    let entries: Vec<SweepEntry> = spec
        .values
        .par_iter()
        .zip(params.par_iter())
        .map(|(&value, p)| {
            let mut entry = SweepEntry {
                value,
                params: *p,
                x_star: x_star(p),
                y_star: y_star(p),
                boundary: None,
                report: None,
                probe_value: None,
                error: None,
            };
            let solved = solve(p, &spec.solver).and_then(|(b, report)| {
                let batch = draw_batch(p, &probe_cfg, 1.0)?;
                let v = value_on_batch(
                    p,
                    &batch,
                    probe_cfg.antithetic,
                    probe.0,
                    probe.1,
                    &b,
                    spec.solver.estimator,
                );
                Ok((b, report, v))
            });
            match solved {
                Ok((b, report, v)) => {
                    entry.boundary = Some(b);
                    entry.report = Some(report);
                    entry.probe_value = Some(v);
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            entry
        })
        .collect();

    let ok: Vec<&SweepEntry> = entries.iter().filter(|e| e.boundary.is_some()).collect();
    let bdir = boundary_direction(spec.parameter);
    let vdir = value_direction(spec.parameter);
    let mut boundary_orderings = Vec::new();
    let mut value_orderings = Vec::new();
    for w in ok.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (bl, bh) = (lo.boundary.as_ref().unwrap(), hi.boundary.as_ref().unwrap());
        let (rl, rh) = (lo.report.as_ref().unwrap(), hi.report.as_ref().unwrap());
        boundary_orderings.push(compare_boundaries(
            lo.value,
            hi.value,
            bl,
            &rl.node_se,
            bh,
            &rh.node_se,
            bdir,
        ));
        let (vl, vh) = (lo.probe_value.unwrap(), hi.probe_value.unwrap());
        let tol = 3.0 * vl.std_error.hypot(vh.std_error);
        value_orderings.push(OrderingVerdict {
            lo_value: lo.value,
            hi_value: hi.value,
            expected: vdir,
            max_violation: vdir.violation(vl.mean, vh.mean),
            worst_x: probe.0,
            tolerance_at_worst: tol,
            pass: vdir.holds(vl.mean, vh.mean, tol),
        });
    }
    let anchors = anchor_laws(spec.parameter, &params);
    Ok(SweepReport {
        parameter: spec.parameter,
        probe,
        entries,
        boundary_orderings,
        value_orderings,
        anchors,
    })
}

/// Standard error at `x` from per-node errors: the larger of the two bracketing nodes.
fn se_at(b: &Boundary, node_se: &[f64], x: f64) -> f64 {
    let xs = b.xs();
    let i = xs.partition_point(|&v| v < x);
    if i < xs.len() && xs[i] == x {
        return node_se.get(i).copied().unwrap_or(0.0);
    }
    let lo = node_se.get(i.saturating_sub(1)).copied().unwrap_or(0.0);
    let hi = node_se.get(i).copied().unwrap_or(0.0);
    lo.max(hi)
}

/// Grades `hi` against `lo` on the union of both grids over `[0, min x*]`.
pub fn compare_boundaries(
    lo_value: f64,
    hi_value: f64,
    lo: &Boundary,
    lo_se: &[f64],
    hi: &Boundary,
    hi_se: &[f64],
    expected: Direction,
) -> OrderingVerdict {
    let end = lo.x_end().min(hi.x_end());
    let mut xs: Vec<f64> = lo
        .xs()
        .iter()
        .chain(hi.xs())
        .copied()
        .filter(|&x| x <= end)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut verdict = OrderingVerdict {
        lo_value,
        hi_value,
        expected,
        max_violation: 0.0,
        worst_x: 0.0,
        tolerance_at_worst: 0.0,
        pass: true,
    };
    let mut worst_ratio = f64::NEG_INFINITY;
    for x in xs {
        let (a, b) = (lo.value_at(x), hi.value_at(x));
        let tol = 3.0 * se_at(lo, lo_se, x).hypot(se_at(hi, hi_se, x));
        let v = expected.violation(a, b);
        verdict.max_violation = verdict.max_violation.max(v);
        let ratio = if tol > 0.0 {
            v / tol
        } else if v > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            verdict.worst_x = x;
            verdict.tolerance_at_worst = tol;
        }
        if !expected.holds(a, b, tol) {
            verdict.pass = false;
        }
    }
    verdict
}

/// Closed-form anchor laws across a sweep.
pub fn anchor_laws(param: Param, params: &[ModelParams]) -> AnchorVerdict {
    let xs: Vec<f64> = params.iter().map(x_star).collect();
    let ys: Vec<f64> = params.iter().map(y_star).collect();
    let constant = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let moving = |v: &[f64]| v.windows(2).all(|w| w[1] != w[0]);
    let (description, pass) = match param {
        Param::Sigma2 => (
            "x* constant, y* nondecreasing",
            constant(&xs) && nondecreasing(&ys),
        ),
        Param::Alpha2 => (
            "x* constant, y* nonincreasing",
            constant(&xs) && nonincreasing(&ys),
        ),
        Param::Sigma1 => (
            "y* constant, x* nondecreasing",
            constant(&ys) && nondecreasing(&xs),
        ),
        Param::Alpha1 => ("y* constant", constant(&ys)),
        Param::R => ("x* and y* both move", moving(&xs) && moving(&ys)),
    };
    AnchorVerdict {
        x_star: xs,
        y_star: ys,
        description: description.to_string(),
        pass,
    }
}

/// Value at one probe point for the low and high parameter value.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeVerdict {
    pub x: f64,
    pub y: f64,
    pub lo: ValueEstimate,
    pub hi: ValueEstimate,
    /// `3 sqrt(se_lo^2 + se_hi^2)`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityVerdict {
    pub parameter: Param,
    pub lo: f64,
    pub hi: f64,
    pub expected: Direction,
    pub points: Vec<ProbeVerdict>,
    pub pass: bool,
}

/// Solves the boundary at `lo` and at `hi` and checks that the value moves
/// in the expected direction at every probe, using common random numbers.
pub fn value_monotonicity_check(
    base: &ModelParams,
    parameter: Param,
    lo: f64,
    hi: f64,
    probes: &[(f64, f64)],
    settings: &SolverSettings,
) -> Result<MonotonicityVerdict> {
    if !(lo <= hi) {
        return Err(Error::Param(format!("need lo <= hi, got {lo} > {hi}")));
    }
    let p_lo = base.with(parameter, lo)?;
    let p_hi = base.with(parameter, hi)?;
    let cfg = settings.sampler.reseeded(u64::MAX - 1);
    let values = |p: &ModelParams| -> Result<Vec<ValueEstimate>> {
        let (b, _) = solve(p, settings)?;
        let batch = draw_batch(p, &cfg, 1.0)?;
        Ok(probes
            .iter()
            .map(|&(x, y)| value_on_batch(p, &batch, cfg.antithetic, x, y, &b, settings.estimator))
            .collect())
    };
    let (v_lo, v_hi) = rayon::join(|| values(&p_lo), || values(&p_hi));
    let (v_lo, v_hi) = (v_lo?, v_hi?);
    let expected = value_direction(parameter);
    let points: Vec<ProbeVerdict> = probes
        .iter()
        .zip(v_lo.iter().zip(&v_hi))
        .map(|(&(x, y), (&l, &h))| {
            let tolerance = 3.0 * l.std_error.hypot(h.std_error);
            ProbeVerdict {
                x,
                y,
                lo: l,
                hi: h,
                tolerance,
                pass: expected.holds(l.mean, h.mean, tolerance),
            }
        })
        .collect();
    let pass = points.iter().all(|p| p.pass);
    Ok(MonotonicityVerdict {
        parameter,
        lo,
        hi,
        expected,
        points,
        pass,
    })
}
