use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model and optimizer settings. Defaults are the published ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Ensemble size.
    pub n: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Number of classes.
    pub m: usize,
    /// Classifiers selected per input.
    pub k: usize,
    /// Output scale of the tanh activation.
    pub tau: f64,
    pub lr: f64,
    pub decay: f64,
    /// Apply weight decay to biases as well as weights.
    pub decay_biases: bool,
    /// Variance-scaling factor for the weight initializer.
    pub init_scale: f64,
    pub seed: u64,
}

impl Hyperparams {
    pub const DEFAULT_N: usize = 1024;
    pub const DEFAULT_K: usize = 32;
    pub const DEFAULT_TAU: f64 = 250.0;
    pub const DEFAULT_LR: f64 = 1e-4;
    pub const DEFAULT_DECAY: f64 = 1e-4;
    pub const ENSEMBLE_INIT_SCALE: f64 = 1.0;
    pub const BASELINE_INIT_SCALE: f64 = 10.0;

    pub fn new(d: usize, m: usize) -> Self {
        Self {
            n: Self::DEFAULT_N,
            d,
            m,
            k: Self::DEFAULT_K,
            tau: Self::DEFAULT_TAU,
            lr: Self::DEFAULT_LR,
            decay: Self::DEFAULT_DECAY,
            decay_biases: true,
            init_scale: Self::ENSEMBLE_INIT_SCALE,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 {
            return fail("embedding dimension must be at least 1".into());
        }
        if self.m == 0 {
            return fail("class count must be at least 1".into());
        }
        if self.n == 0 {
            return fail("ensemble size must be at least 1".into());
        }
        if self.k == 0 || self.k > self.n {
            return fail(format!("k must satisfy 1 <= k <= n (k={}, n={})", self.k, self.n));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be positive and finite, got {}", self.tau));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate must be positive and finite, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.decay) {
            return fail(format!("decay must lie in [0, 1), got {}", self.decay));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return fail(format!("init scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }
}
