//! Finite-difference obstacle-problem solver for the value function on a
//! truncated rectangle, used as an independent check on the Monte-Carlo
//! boundary.
//!
//! Solves `max{(L - r) v, F - v} = 0` with projected SOR on a uniform grid.
//! The edges carry exact data: the one-dimensional values on `x = 0` and
//! `y = 0`, and `F` on the far edges, which lie inside the stopping region
//! once `x_max > x*` and `y_max > y*`.

use serde::Serialize;

use crate::boundary::Boundary;
use crate::closed_form::{v1, v2, x_star, y_star};
use crate::error::{Error, Result};
use crate::isotonic::project_nonincreasing;
use crate::model::ModelParams;

/// Settings of the projected-SOR solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeConfig {
    pub x_max: f64,
    pub y_max: f64,
    /// Number of grid intervals along `x`.
    pub nx: usize,
    /// Number of grid intervals along `y`.
    pub ny: usize,
    pub omega: f64,
    /// Sweeps stop once the largest node update falls below this (currency).
    pub psor_tol: f64,
    pub max_sweeps: usize,
}

impl PdeConfig {
    /// Rectangle `2.5 x* by 2.5 y*`, 200 by 200 intervals.
    pub fn for_params(p: &ModelParams) -> Self {
        PdeConfig {
            x_max: 2.5 * x_star(p),
            y_max: 2.5 * y_star(p),
            nx: 200,
            ny: 200,
            omega: 1.9,
            psor_tol: 1e-9 * p.cost(),
            max_sweeps: 200_000,
        }
    }

    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        if !(self.x_max > 1.5 * x_star(p)) {
            return Err(Error::Param(format!(
                "x_max = {} must exceed 1.5 x* = {}",
                self.x_max,
                1.5 * x_star(p)
            )));
        }
        if !(self.y_max > 1.5 * y_star(p)) {
            return Err(Error::Param(format!(
                "y_max = {} must exceed 1.5 y* = {}",
                self.y_max,
                1.5 * y_star(p)
            )));
        }
        if self.nx < 50 || self.ny < 50 {
            return Err(Error::Param(format!(
                "nx and ny must be at least 50 (got {}, {})",
                self.nx, self.ny
            )));
        }
        if !(self.omega > 1.0 && self.omega < 2.0) {
            return Err(Error::Param(format!(
                "omega must lie in (1, 2), got {}",
                self.omega
            )));
        }
        if !(self.psor_tol > 0.0) {
            return Err(Error::Param(format!(
                "psor_tol must be positive, got {}",
                self.psor_tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Param("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// Converged grid solution.
#[derive(Debug, Clone, Serialize)]
pub struct PdeSolution {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major by `x`: `values[i * ys.len() + j]` is `v(xs[i], ys[j])`.
    pub values: Vec<f64>,
    pub boundary: Boundary,
    /// Largest `|min(v - F, -(L - r) v / diag)|` over interior nodes.
    pub max_residual: f64,
    pub sweeps: usize,
}

impl PdeSolution {
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn dy(&self) -> f64 {
        self.ys[1] - self.ys[0]
    }

    /// Bilinear interpolation of `v`; `None` outside the grid.
    pub fn interpolate(&self, x: f64, y: f64) -> Option<f64> {
        let (dx, dy) = (self.dx(), self.dy());
        let (fx, fy) = (x / dx, y / dy);
        if !(fx >= 0.0 && fy >= 0.0) || x > *self.xs.last()? || y > *self.ys.last()? {
            return None;
        }
        let i = (fx.floor() as usize).min(self.xs.len() - 2);
        let j = (fy.floor() as usize).min(self.ys.len() - 2);
        let (s, t) = (fx - i as f64, fy - j as f64);
        Some(
            (1.0 - s) * (1.0 - t) * self.value(i, j)
                + s * (1.0 - t) * self.value(i + 1, j)
                + (1.0 - s) * t * self.value(i, j + 1)
                + s * t * self.value(i + 1, j + 1),
        )
    }
}

/// Off-diagonal weights `(lower, upper)` of `(1/2) s^2 z^2 d^2/dz^2 + a z d/dz`
/// at `z` on spacing `h`; upwinds the drift when central differences would
/// lose diagonal dominance.
#[inline]
fn stencil(alpha: f64, sigma: f64, z: f64, h: f64) -> (f64, f64) {
    let diff = 0.5 * sigma * sigma * z * z / (h * h);
    let drift = alpha * z / h;
    if sigma * sigma * z >= alpha.abs() * h {
        (diff - 0.5 * drift, diff + 0.5 * drift)
    } else if drift >= 0.0 {
        (diff, diff + drift)
    } else {
        (diff - drift, diff)
    }
}

fn uniform(end: f64, n: usize) -> Vec<f64> {
    let h = end / n as f64;
    let mut v: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    v[n] = end;
    v
}

/// Solves the obstacle problem and extracts the boundary with the default
/// contact tolerance `1e-6 I`.
pub fn solve_vi(p: &ModelParams, cfg: &PdeConfig) -> Result<PdeSolution> {
    cfg.validate(p)?;
    let xs = uniform(cfg.x_max, cfg.nx);
    let ys = uniform(cfg.y_max, cfg.ny);
    let (dx, dy) = (xs[1], ys[1]);
    let m = ys.len();
    let idx = |i: usize, j: usize| i * m + j;

    let xw: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| stencil(p.alpha1(), p.sigma1(), x, dx))
        .collect();
    let yw: Vec<(f64, f64)> = ys
        .iter()
        .map(|&y| stencil(p.alpha2(), p.sigma2(), y, dy))
        .collect();
    let obstacle: Vec<f64> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| p.payoff(x, y)))
        .collect();

    let mut v = vec![0.0; xs.len() * m];
    let v1_x: Vec<f64> = xs.iter().map(|&x| v1(p, x)).collect();
    let v2_y: Vec<f64> = ys.iter().map(|&y| v2(p, y)).collect();
    for i in 0..xs.len() {
        for j in 0..m {
            let k = idx(i, j);
            v[k] = if i == 0 {
                v2_y[j]
            } else if j == 0 {
                v1_x[i]
            } else if i == cfg.nx || j == cfg.ny {
                obstacle[k]
            } else {
                obstacle[k].max(v1_x[i]).max(v2_y[j])
            };
        }
    }

    let mut sweeps = 0;
    loop {
        if sweeps >= cfg.max_sweeps {
            let last = psor_sweep(
                &mut v,
                &obstacle,
                &xw,
                &yw,
                p.r(),
                cfg.omega,
                cfg.nx,
                cfg.ny,
            );
            return Err(Error::NoConvergence {
                sweeps,
                last_update: last,
            });
        }
        let change = psor_sweep(
            &mut v,
            &obstacle,
            &xw,
            &yw,
            p.r(),
            cfg.omega,
            cfg.nx,
            cfg.ny,
        );
        sweeps += 1;
        if change < cfg.psor_tol {
            break;
        }
    }

    let mut max_residual: f64 = 0.0;
    for i in 1..cfg.nx {
        for j in 1..cfg.ny {
            let k = idx(i, j);
            let diag = xw[i].0 + xw[i].1 + yw[j].0 + yw[j].1 + p.r();
            let generator =
                xw[i].0 * v[k - m] + xw[i].1 * v[k + m] + yw[j].0 * v[k - 1] + yw[j].1 * v[k + 1]
                    - diag * v[k];
            let res = (v[k] - obstacle[k]).min(-generator / diag);
            max_residual = max_residual.max(res.abs());
        }
    }

    let mut sol = PdeSolution {
        xs,
        ys,
        values: v,
        boundary: Boundary::from_nodes(vec![0.0, 1.0], vec![0.0, 0.0])?,
        max_residual,
        sweeps,
    };
    sol.boundary = extract_boundary(&sol, p, 1e-6 * p.cost())?;
    Ok(sol)
}

/// One projected Gauss–Seidel sweep over interior nodes; returns the largest update.
#[allow(clippy::too_many_arguments)]
fn psor_sweep(
    v: &mut [f64],
    obstacle: &[f64],
    xw: &[(f64, f64)],
    yw: &[(f64, f64)],
    r: f64,
    omega: f64,
    nx: usize,
    ny: usize,
) -> f64 {
    let m = ny + 1;
    let mut change: f64 = 0.0;
    for i in 1..nx {
        let (xl, xu) = xw[i];
        for j in 1..ny {
            let k = i * m + j;
            let (yl, yu) = yw[j];
            let diag = xl + xu + yl + yu + r;
            let gs = (xl * v[k - m] + xu * v[k + m] + yl * v[k - 1] + yu * v[k + 1]) / diag;
            let new = (v[k] + omega * (gs - v[k])).max(obstacle[k]);
            change = change.max((new - v[k]).abs());
            v[k] = new;
        }
    }
    change
}

/// Raw contact heights: for each column `x < x*`, the first `y` where
/// `v - F < contact_tol`, refined with the smooth-fit profile of `v - F`.
pub fn contact_heights(
    sol: &PdeSolution,
    p: &ModelParams,
    contact_tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let xs_end = x_star(p);
    let dy = sol.dy();
    let mut out = Vec::new();
    for (i, &x) in sol.xs.iter().enumerate() {
        if x >= xs_end * (1.0 - 1e-12) {
            break;
        }
        let gap = |j: usize| (sol.value(i, j) - p.payoff(x, sol.ys[j])).max(0.0);
        let Some(j) = (0..sol.ys.len()).find(|&j| gap(j) < contact_tol) else {
            return Err(Error::Truncation(format!(
                "no contact with the payoff in column x = {x}; enlarge y_max (currently {})",
                sol.ys.last().copied().unwrap_or(0.0)
            )));
        };
        // Near the boundary v - F behaves like c (b - y)^2, so its square root
        // is locally linear; extrapolate the last two gaps below contact.
        let b = if j >= 2 {
            let (g1, g2) = (gap(j - 1).sqrt(), gap(j - 2).sqrt());
            let slope = g2 - g1;
            let step = if slope > 0.0 { g1 / slope * dy } else { dy };
            sol.ys[j - 1] + step.clamp(0.0, dy)
        } else {
            sol.ys[j]
        };
        out.push((x, b));
    }
    Ok(out)
}

/// Boundary read off the solution: contact heights clamped to
/// `[max(h, 0), y*]`, made nonincreasing and closed at `(x*, 0)`.
pub fn extract_boundary(sol: &PdeSolution, p: &ModelParams, contact_tol: f64) -> Result<Boundary> {
    if !(contact_tol > 0.0) {
        return Err(Error::Param(format!(
            "contact_tol must be positive, got {contact_tol}"
        )));
    }
    let raw = contact_heights(sol, p, contact_tol)?;
    let ys = y_star(p);
    let mut xs: Vec<f64> = raw.iter().map(|&(x, _)| x).collect();
    let mut bs: Vec<f64> = raw
        .iter()
        .map(|&(x, b)| b.clamp(p.kill_line(x).max(0.0), ys))
        .collect();
    xs.push(x_star(p));
    bs.push(0.0);
    let mut bs = project_nonincreasing(&bs);
    *bs.last_mut().unwrap() = 0.0;
    Boundary::from_nodes(xs, bs)
}

/// Solution of the one-dimensional obstacle problem on the `x` axis
/// (`y = 0`), discretized with the same stencil as the rectangle.
#[derive(Debug, Clone)]
pub struct AxisSolution {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub sweeps: usize,
}

/// Projected SOR for `max{(L_X - r) v, F(., 0) - v} = 0` on `[0, x_max]`
/// with `v(0) = 0` and `v(x_max) = F(x_max, 0)`.
pub fn solve_axis(
    p: &ModelParams,
    x_max: f64,
    nx: usize,
    omega: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<AxisSolution> {
    if !(x_max > x_star(p)) || nx < 2 || !(omega > 0.0 && omega < 2.0) || !(tol > 0.0) {
        return Err(Error::Param(format!(
            "invalid axis problem: x_max={x_max}, nx={nx}, omega={omega}, tol={tol}"
        )));
    }
    let xs = uniform(x_max, nx);
    let dx = xs[1];
    let w: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| stencil(p.alpha1(), p.sigma1(), x, dx))
        .collect();
    let obstacle: Vec<f64> = xs.iter().map(|&x| p.payoff(x, 0.0)).collect();
    let mut v: Vec<f64> = obstacle.iter().map(|f| f.max(0.0)).collect();
    v[0] = 0.0;
    let mut sweeps = 0;
    loop {
        let mut change: f64 = 0.0;
        for i in 1..nx {
            let (lo, hi) = w[i];
            let gs = (lo * v[i - 1] + hi * v[i + 1]) / (lo + hi + p.r());
            let new = (v[i] + omega * (gs - v[i])).max(obstacle[i]);
            change = change.max((new - v[i]).abs());
            v[i] = new;
        }
        sweeps += 1;
        if change < tol {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence {
                sweeps,
                last_update: change,
            });
        }
    }
    Ok(AxisSolution {
        xs,
        values: v,
        sweeps,
    })
}

/// Observed convergence order of the axis solver against the closed form,
/// from the largest error over `samples` at grid sizes `nx` and `2 nx`.
/// Sample points must be nodes of the coarse grid.
pub fn axis_observed_order(
    p: &ModelParams,
    x_max: f64,
    nx: usize,
    samples: &[f64],
    omega: f64,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    let err = |n: usize| -> Result<f64> {
        let sol = solve_axis(p, x_max, n, omega, tol, 10_000_000)?;
        let h = x_max / n as f64;
        Ok(samples
            .iter()
            .map(|&x| {
                let k = (x / h).round() as usize;
                (sol.values[k] - v1(p, x)).abs()
            })
            .fold(0.0, f64::max))
    };
    let (coarse, fine) = (err(nx)?, err(2 * nx)?);
    Ok(((coarse / fine).log2(), coarse, fine))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fig1_preset;

    fn small_config(p: &ModelParams) -> PdeConfig {
        PdeConfig {
            nx: 80,
            ny: 80,
            ..PdeConfig::for_params(p)
        }
    }

    #[test]
    fn config_validation() {
        let p = fig1_preset();
        let good = PdeConfig::for_params(&p);
        assert!(good.validate(&p).is_ok());
        assert!(PdeConfig {
            x_max: 120.0,
            ..good
        }
        .validate(&p)
        .is_err());
        assert!(PdeConfig {
            y_max: 80.0,
            ..good
        }
        .validate(&p)
        .is_err());
        assert!(PdeConfig { nx: 49, ..good }.validate(&p).is_err());
        assert!(PdeConfig { omega: 2.0, ..good }.validate(&p).is_err());
    }

    #[test]
    fn upwinds_only_when_needed() {
        let (lo, hi) = stencil(0.03, 0.15, 100.0, 1.0);
        assert!((hi - lo - 3.0).abs() < 1e-12);
        // sigma^2 z < alpha h: drift goes fully to the upper neighbour
        let (lo, hi) = stencil(0.03, 0.15, 0.5, 1.0);
        assert!((hi - lo - 0.015).abs() < 1e-15 && lo > 0.0);
    }

    #[test]
    fn solution_dominates_payoff_and_is_monotone() {
        let p = fig1_preset();
        let cfg = small_config(&p);
        let sol = solve_vi(&p, &cfg).unwrap();
        let m = sol.ys.len();
        for i in 0..sol.xs.len() {
            for j in 0..m {
                let v = sol.value(i, j);
                assert!(v >= p.payoff(sol.xs[i], sol.ys[j]).max(0.0) - cfg.psor_tol);
                if i > 0 {
                    assert!(v >= sol.value(i - 1, j) - 1e-9, "x-monotone at ({i},{j})");
                }
                if j > 0 {
                    assert!(v >= sol.value(i, j - 1) - 1e-9, "y-monotone at ({i},{j})");
                }
            }
        }
        let (nx, ny) = (cfg.nx, cfg.ny);
        assert_eq!(sol.value(nx, ny), p.payoff(cfg.x_max, cfg.y_max));
        assert!(sol.max_residual <= 1e-6 * p.cost(), "{}", sol.max_residual);
    }

    #[test]
    fn extracted_boundary_anchors() {
        let p = fig1_preset();
        let sol = solve_vi(&p, &small_config(&p)).unwrap();
        let raw = contact_heights(&sol, &p, 1e-6 * p.cost()).unwrap();
        assert_eq!(raw[0].0, 0.0);
        assert!((raw[0].1 - y_star(&p)).abs() <= sol.dy(), "{:?}", raw[0]);
        let b = &sol.boundary;
        assert!(b.bs().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(b.x_end(), x_star(&p));
    }

    #[test]
    fn truncated_domain_reports_missing_contact() {
        let p = fig1_preset();
        let sol = solve_vi(&p, &small_config(&p)).unwrap();
        assert!(matches!(
            contact_heights(&sol, &p, -1.0),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn axis_solver_matches_closed_form() {
        let p = fig1_preset();
        let sol = solve_axis(&p, 250.0, 400, 1.9, 1e-10, 10_000_000).unwrap();
        for (x, v) in sol.xs.iter().zip(&sol.values).step_by(20) {
            assert!((v - v1(&p, *x)).abs() < 0.5, "x={x}: {v} vs {}", v1(&p, *x));
        }
    }
}
