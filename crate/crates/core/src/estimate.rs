use serde::{Deserialize, Serialize};

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl ValueEstimate {
    /// Deterministic value with zero variance.
    pub fn exact(value: f64, n: usize) -> Self {
        ValueEstimate {
            mean: value,
            std_error: 0.0,
            n,
        }
    }

    /// Affine map `a + s * X` of the estimate.
    pub fn affine(self, offset: f64, scale: f64) -> Self {
        ValueEstimate {
            mean: offset + scale * self.mean,
            std_error: scale.abs() * self.std_error,
            n: self.n,
        }
    }

    /// `(self - other) / sqrt(se1^2 + se2^2)`; zero when both are exact and equal.
    pub fn z_score(&self, other: &ValueEstimate) -> f64 {
        let diff = self.mean - other.mean;
        let se = self.std_error.hypot(other.std_error);
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

/// Streaming mean / standard-error accumulator (Welford).
///
/// With `antithetic`, consecutive pushes `(2k, 2k+1)` form one antithetic
/// pair and the error is computed from the pair means; a trailing unpaired
/// value counts as its own observation.
#[derive(Debug, Clone)]
pub struct Accumulator {
    antithetic: bool,
    pending: Option<f64>,
    n_raw: usize,
    n_obs: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new(antithetic: bool) -> Self {
        Accumulator {
            antithetic,
            pending: None,
            n_raw: 0,
            n_obs: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        self.n_raw += 1;
        if self.antithetic {
            match self.pending.take() {
                None => self.pending = Some(v),
                Some(first) => self.observe(0.5 * (first + v)),
            }
        } else {
            self.observe(v);
        }
    }

    #[inline]
    fn observe(&mut self, v: f64) {
        self.n_obs += 1;
        let d = v - self.mean;
        self.mean += d / self.n_obs as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn finish(mut self) -> ValueEstimate {
        if let Some(last) = self.pending.take() {
            self.observe(last);
        }
        assert!(self.n_obs > 0, "empty sample");
        let se = if self.n_obs < 2 {
            0.0
        } else {
            (self.m2 / (self.n_obs - 1) as f64 / self.n_obs as f64).sqrt()
        };
        ValueEstimate {
            mean: self.mean,
            std_error: se,
            n: self.n_raw,
        }
    }
}

/// Sample mean and standard error of `values`; see [`Accumulator`].
pub fn mean_and_se(values: &[f64], antithetic: bool) -> ValueEstimate {
    let mut acc = Accumulator::new(antithetic);
    for &v in values {
        acc.push(v);
    }
    acc.finish()
}
