//! Problem parameters and the closed-form payoff geometry.
//!
//! Two independent geometric Brownian motions `X` and `Y` drive the prices of
//! two goods. Investing at price levels `(x, y)` yields the perpetuity value
//! `F(x, y) = Q1 x / delta1 + Q2 y / delta2 - I` with `delta_i = r - alpha_i`.
//! This module also provides the two affine curves that bracket the optimal
//! boundary from below: the indifference line `f` (zero set of `F`) and the
//! kill line `h` (zero set of `(L - r) F`).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market and project constants, validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    r: f64,
    alpha1: f64,
    alpha2: f64,
    sigma1: f64,
    sigma2: f64,
    q1: f64,
    q2: f64,
    cost: f64,
    delta1: f64,
    delta2: f64,
    lambda: f64,
}

/// Parameter names accepted in config files, in canonical order.
pub const CONFIG_KEYS: [&str; 8] = ["r", "alpha1", "alpha2", "sigma1", "sigma2", "Q1", "Q2", "I"];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    r: f64,
    alpha1: f64,
    alpha2: f64,
    sigma1: f64,
    sigma2: f64,
    #[serde(rename = "Q1")]
    q1: f64,
    #[serde(rename = "Q2")]
    q2: f64,
    #[serde(rename = "I")]
    cost: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(p: RawParams) -> Result<Self> {
        ModelParams::new(
            p.r, p.alpha1, p.alpha2, p.sigma1, p.sigma2, p.q1, p.q2, p.cost,
        )
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            r: p.r,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            q1: p.q1,
            q2: p.q2,
            cost: p.cost,
        }
    }
}

/// A single scalar parameter that can be varied in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Sigma1,
    Sigma2,
    Alpha1,
    Alpha2,
    R,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Sigma1 => "sigma1",
            Param::Sigma2 => "sigma2",
            Param::Alpha1 => "alpha1",
            Param::Alpha2 => "alpha2",
            Param::R => "r",
        }
    }
}

impl std::str::FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma1" => Ok(Param::Sigma1),
            "sigma2" => Ok(Param::Sigma2),
            "alpha1" => Ok(Param::Alpha1),
            "alpha2" => Ok(Param::Alpha2),
            "r" => Ok(Param::R),
            other => Err(Error::Param(format!(
                "unknown sweep parameter `{other}` (expected sigma1, sigma2, alpha1, alpha2 or r)"
            ))),
        }
    }
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ModelParams {
    /// Validates and builds a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: f64,
        alpha1: f64,
        alpha2: f64,
        sigma1: f64,
        sigma2: f64,
        q1: f64,
        q2: f64,
        cost: f64,
    ) -> Result<Self> {
        let all = [r, alpha1, alpha2, sigma1, sigma2, q1, q2, cost];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("all parameters must be finite".into()));
        }
        for (name, v) in [
            ("r", r),
            ("sigma1", sigma1),
            ("sigma2", sigma2),
            ("Q1", q1),
            ("Q2", q2),
            ("I", cost),
        ] {
            if v <= 0.0 {
                return Err(Error::Param(format!("{name} must be positive, got {v}")));
            }
        }
        if r <= alpha1.max(alpha2) {
            return Err(Error::Param(format!(
                "discount rate r = {r} must exceed both drifts (alpha1 = {alpha1}, alpha2 = {alpha2})"
            )));
        }
        let delta1 = r - alpha1;
        let delta2 = r - alpha2;
        assert!(delta1 > 0.0 && delta2 > 0.0);
        Ok(ModelParams {
            r,
            alpha1,
            alpha2,
            sigma1,
            sigma2,
            q1,
            q2,
            cost,
            delta1,
            delta2,
            lambda: delta2 / q2,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn q1(&self) -> f64 {
        self.q1
    }
    pub fn q2(&self) -> f64 {
        self.q2
    }
    /// Sunk investment cost `I`.
    pub fn cost(&self) -> f64 {
        self.cost
    }
    pub fn delta1(&self) -> f64 {
        self.delta1
    }
    pub fn delta2(&self) -> f64 {
        self.delta2
    }
    /// Fredholm constant `delta2 / Q2`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::Sigma1 => self.sigma1,
            Param::Sigma2 => self.sigma2,
            Param::Alpha1 => self.alpha1,
            Param::Alpha2 => self.alpha2,
            Param::R => self.r,
        }
    }

    /// Copy with one parameter replaced; revalidates.
    pub fn with(&self, param: Param, value: f64) -> Result<Self> {
        let mut raw = RawParams::from(*self);
        match param {
            Param::Sigma1 => raw.sigma1 = value,
            Param::Sigma2 => raw.sigma2 = value,
            Param::Alpha1 => raw.alpha1 = value,
            Param::Alpha2 => raw.alpha2 = value,
            Param::R => raw.r = value,
        }
        ModelParams::try_from(raw)
    }

    /// Immediate investment value `F(x, y)`.
    pub fn payoff(&self, x: f64, y: f64) -> f64 {
        self.q1 * x / self.delta1 + self.q2 * y / self.delta2 - self.cost
    }

    /// Running reward `Q1 x + Q2 y - r I`, i.e. `-(L - r) F(x, y)`.
    pub fn running_reward(&self, x: f64, y: f64) -> f64 {
        self.q1 * x + self.q2 * y - self.r * self.cost
    }

    /// Indifference line: the `y` with `F(x, y) = 0`.
    pub fn indifference(&self, x: f64) -> f64 {
        self.lambda * (self.cost - self.q1 * x / self.delta1)
    }

    /// Kill line: the `y` with `(L - r) F(x, y) = 0`. Negative for `x > r I / Q1`.
    pub fn kill_line(&self, x: f64) -> f64 {
        (self.r * self.cost - self.q1 * x) / self.q2
    }

    /// Growth constant `C = max(Q1/delta1, Q2/delta2)` in `V <= C (x + y)`.
    pub fn growth_constant(&self) -> f64 {
        (self.q1 / self.delta1).max(self.q2 / self.delta2)
    }

    /// Parses the line-based `key = value` format. Blank lines and `#` comments
    /// are ignored; every key in [`CONFIG_KEYS`] must appear exactly once.
    pub fn from_config_str(text: &str, origin: &Path) -> Result<Self> {
        let mut values: [Option<f64>; 8] = [None; 8];
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let slot = CONFIG_KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| parse_err(format!("unknown key `{key}`")))?;
            if values[slot].is_some() {
                return Err(parse_err(format!("duplicate key `{key}`")));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{}` is not a number", value.trim())))?;
            values[slot] = Some(v);
        }
        let missing: Vec<&str> = CONFIG_KEYS
            .iter()
            .zip(values.iter())
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                msg: format!("missing keys: {}", missing.join(", ")),
            });
        }
        let v: Vec<f64> = values.iter().map(|v| v.unwrap()).collect();
        ModelParams::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7])
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text, path)
    }

    /// Serializes back to the config format.
    pub fn to_config_string(&self) -> String {
        let vals = [
            self.r,
            self.alpha1,
            self.alpha2,
            self.sigma1,
            self.sigma2,
            self.q1,
            self.q2,
            self.cost,
        ];
        let mut out = String::new();
        for (k, v) in CONFIG_KEYS.iter().zip(vals) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parameters of the first figure preset with `sigma2 = 0.2`.
pub fn fig1_preset() -> ModelParams {
    ModelParams::new(0.1, 0.03, 0.03, 0.15, 0.2, 5.0, 10.0, 4000.0).unwrap()
}

/// Baseline of the `alpha2` sweep (`alpha2 = 0.03`).
pub fn fig2_preset() -> ModelParams {
    ModelParams::new(0.1, 0.03, 0.03, 0.15, 0.2, 5.0, 10.0, 4000.0).unwrap()
}

/// Baseline of the `r` sweep (`r = 0.1`).
pub fn fig3_preset() -> ModelParams {
    ModelParams::new(0.1, 0.02, 0.03, 0.15, 0.15, 5.0, 10.0, 4000.0).unwrap()
}
