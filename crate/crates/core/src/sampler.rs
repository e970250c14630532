//! Exact simulation of the two price processes at an independent
//! exponential time, and their log-normal transition densities.
//!
//! For `zeta ~ Exp(r)` independent of the Brownian drivers,
//! `E[int_0^inf e^{-rt} g(Z_t) dt] = E[g(Z_zeta)] / r`, so an infinite-horizon
//! discounted integral becomes one draw per sample. Both processes are
//! multiplicative, so a batch drawn from unit starting prices serves every
//! starting point `(x, y)` by rescaling.
//!
//! Sample `i` of a batch takes its randomness from the ChaCha stream
//! `(seed, i)` (or `(seed, i / 2)` for antithetic pairs), so batches are
//! identical whether generated sequentially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Default Monte-Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: DEFAULT_SAMPLES,
            seed: 1,
            antithetic: false,
        }
    }
}

impl SamplerConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            n_samples,
            seed,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Param("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Same config with the seed replaced by a derived one.
    pub fn reseeded(&self, tag: u64) -> Self {
        SamplerConfig {
            seed: derive_seed(self.seed, tag),
            ..*self
        }
    }
}

/// Mixes a master seed with a tag into an independent-looking seed (splitmix64).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master
        ^ tag
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw of `(zeta, X_zeta, Y_zeta)` with `Y` started from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub zeta: f64,
    pub x_at_zeta: f64,
    pub y_unit_at_zeta: f64,
}

/// Raw normals and uniform behind one sample.
#[derive(Debug, Clone, Copy)]
struct Shocks {
    u: f64,
    z1: f64,
    z2: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shocks(seed: u64, index: usize, antithetic: bool) -> Shocks {
    let (stream, mirrored) = if antithetic {
        (index / 2, index % 2 == 1)
    } else {
        (index, false)
    };
    let mut rng = stream_rng(seed, stream as u64);
    let u: f64 = rng.sample(Open01);
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    if mirrored {
        Shocks {
            u: 1.0 - u,
            z1: -z1,
            z2: -z2,
        }
    } else {
        Shocks { u, z1, z2 }
    }
}

/// Exact GBM transition: price after `dt` given a standard normal shock.
#[inline]
pub fn gbm_step(start: f64, alpha: f64, sigma: f64, dt: f64, z: f64) -> f64 {
    start * ((alpha - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp()
}

/// Draws `cfg.n_samples` states at independent `Exp(r)` times, `X` started at `x0`.
pub fn draw_batch(p: &ModelParams, cfg: &SamplerConfig, x0: f64) -> Result<Vec<StateSample>> {
    cfg.validate()?;
    if !(x0 > 0.0) {
        return Err(Error::Domain(format!("x0 must be positive, got {x0}")));
    }
    let (r, a1, s1, a2, s2) = (p.r(), p.alpha1(), p.sigma1(), p.alpha2(), p.sigma2());
    let batch = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let sh = shocks(cfg.seed, i, cfg.antithetic);
            let zeta = -sh.u.ln() / r;
            StateSample {
                zeta,
                x_at_zeta: gbm_step(x0, a1, s1, zeta, sh.z1),
                y_unit_at_zeta: gbm_step(1.0, a2, s2, zeta, sh.z2),
            }
        })
        .collect();
    Ok(batch)
}

/// Random stream of path `index` in a multi-step simulation.
pub(crate) fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, index as u64)
}

/// Log-normal transition density of a GBM from `start` to `end` over time `t`.
pub fn density_rho(alpha: f64, sigma: f64, t: f64, start: f64, end: f64) -> Result<f64> {
    if !(t > 0.0) || !(start > 0.0) || !(end > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "density needs t, start, end, sigma > 0 (got t={t}, start={start}, end={end}, sigma={sigma})"
        )));
    }
    Ok(density_unchecked(alpha, sigma, t, start, end))
}

#[inline]
pub(crate) fn density_unchecked(alpha: f64, sigma: f64, t: f64, start: f64, end: f64) -> f64 {
    let var = sigma * sigma * t;
    let dev = end.ln() - start.ln() - (alpha - 0.5 * sigma * sigma) * t;
    (-dev * dev / (2.0 * var)).exp() / (sigma * end * (2.0 * std::f64::consts::PI * t).sqrt())
}
