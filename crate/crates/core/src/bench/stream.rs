use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Seeded source of `(x_t, y_t)` pairs: `x_t` uniform on the domain and
/// `y_t = f(x_t) + N(0, sigma^2)`. Draws come from ChaCha20 seeded with the
/// configuration seed, one uniform and one normal per round, so the inputs
/// do not depend on `sigma`.
pub struct DataStream<'a> {
    config: &'a ExperimentConfig,
    rng: ChaCha20Rng,
    noise: Normal<f64>,
}

impl<'a> DataStream<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::Config(format!("noise: {e}")))?;
        Ok(Self {
            config,
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            noise,
        })
    }

    /// Next `(x, y, f(x))`.
    pub fn next_round(&mut self) -> (f64, f64, f64) {
        let (lo, hi) = self.config.domain;
        let u: f64 = self.rng.random();
        let x = lo + (hi - lo) * u;
        let eps = self.noise.sample(&mut self.rng);
        let fx = self.config.function.eval(x);
        (x, fx + eps, fx)
    }
}

/// The first `T` rounds as `(x_t, y_t)`.
pub fn generate_stream(config: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let mut s = DataStream::new(config)?;
    Ok((0..config.horizon)
        .map(|_| {
            let (x, y, _) = s.next_round();
            (x, y)
        })
        .collect())
}
