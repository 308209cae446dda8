//! Priors over the global latent seed that drives generation.
//!
//! A seed is a categorical salient code `c`, a uniform noise vector `z` and a
//! target sequence length `l`. All samplers draw from a caller-owned RNG so a
//! seeded stream reproduces the same sequence of seeds.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dimensions of the salient code and the noise vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentConfig {
    pub noise_dim: usize,
    pub n_categories: usize,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            noise_dim: 64,
            n_categories: 60,
        }
    }
}

/// `l = min(offset + round(scale * B), cap)` with `B ~ Beta(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthPrior {
    pub offset: usize,
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
    pub cap: usize,
}

impl Default for LengthPrior {
    fn default() -> Self {
        Self {
            offset: 20,
            alpha: 12.5,
            beta: 2.5,
            scale: 130.0,
            cap: 150,
        }
    }
}

impl LengthPrior {
    /// Short sequences (10 to 30 frames) for desk-scale runs.
    pub fn desk() -> Self {
        Self {
            offset: 10,
            scale: 20.0,
            cap: 30,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset < 1 {
            return Err(Error::Config("length.offset must be >= 1".into()));
        }
        if self.cap < self.offset {
            return Err(Error::Config("length.cap must be >= length.offset".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("scale", self.scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("length.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Maps a Beta variate onto a length.
    pub fn length_for(&self, b: f64) -> usize {
        let extra = (self.scale * b).round().max(0.0) as usize;
        (self.offset + extra).min(self.cap)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let beta = Beta::new(self.alpha, self.beta).expect("validated length prior");
        self.length_for(beta.sample(rng))
    }
}

/// One draw of the generator's global seed.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeed {
    pub category: usize,
    pub n_categories: usize,
    pub noise: Vec<f64>,
    pub length: usize,
}

impl LatentSeed {
    /// The salient code as a one-hot vector.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_categories];
        c[self.category] = 1.0;
        c
    }
}

/// Uniform categorical draw, returned as `(index, one-hot)`.
pub fn sample_salient<R: Rng + ?Sized>(rng: &mut R, n_categories: usize) -> (usize, Vec<f64>) {
    let k = rng.random_range(0..n_categories);
    let mut c = vec![0.0; n_categories];
    c[k] = 1.0;
    (k, c)
}

/// I.i.d. `U[0, 1]` entries.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

pub fn sample_length<R: Rng + ?Sized>(rng: &mut R, prior: &LengthPrior) -> usize {
    prior.sample(rng)
}

/// Entropy of the uniform categorical prior, `ln K` nats.
pub fn salient_entropy(n_categories: usize) -> f64 {
    (n_categories as f64).ln()
}

/// Joint prior over [`LatentSeed`]s.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SeedPrior {
    pub latent: LatentConfig,
    pub length: LengthPrior,
}

impl SeedPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentSeed {
        let (category, _) = sample_salient(rng, self.latent.n_categories);
        let noise = sample_noise(rng, self.latent.noise_dim);
        let length = self.length.sample(rng);
        LatentSeed {
            category,
            n_categories: self.latent.n_categories,
            noise,
            length,
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<LatentSeed> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}
