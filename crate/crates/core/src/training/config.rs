use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::nets::ModelConfig;
use crate::priors::{LatentConfig, LengthPrior, SeedPrior};
use crate::{Error, Result};

/// How the critic is kept (approximately) 1-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMode {
    #[default]
    SpectralNorm,
    GradientPenalty,
}

impl LipschitzMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LipschitzMode::SpectralNorm => "spectral_norm",
            LipschitzMode::GradientPenalty => "gradient_penalty",
        }
    }
}

/// Training hyperparameters.
///
/// The TOML form keeps these keys at the top level, with optional `[model]`,
/// `[length]` and `[baseline]` tables:
///
/// ```toml
/// lr_g = 1e-4
/// n_critic = 5
/// batch_size = 32
/// lipschitz_mode = "spectral_norm"
/// max_steps = 2000
///
/// [model]
/// n_categories = 60
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_g: f64,
    pub lr_d: f64,
    pub lr_e: f64,
    pub n_critic: usize,
    pub batch_size: usize,
    pub lambda_mi: f64,
    pub lambda_sup: f64,
    pub lipschitz_mode: LipschitzMode,
    pub gp_lambda: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Power iterations per critic update in spectral-norm mode.
    pub sn_power_iters: usize,
    /// Write a metrics row every `log_every` steps.
    pub log_every: u64,
    /// Save a checkpoint every `checkpoint_every` steps (0: only at the end).
    pub checkpoint_every: u64,
    pub model: ModelConfig,
    pub length: LengthPrior,
    pub baseline: BaselineConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_g: 1e-4,
            lr_d: 1e-4,
            lr_e: 1e-4,
            n_critic: 5,
            batch_size: 32,
            lambda_mi: 1.0,
            lambda_sup: 1.0,
            lipschitz_mode: LipschitzMode::SpectralNorm,
            gp_lambda: 10.0,
            max_steps: 10_000,
            seed: 0,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            sn_power_iters: 1,
            log_every: 1,
            checkpoint_every: 0,
            model: ModelConfig::default(),
            length: LengthPrior::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset for the synthetic fixture: short sequences, a
    /// `n_categories`-way code, learning rate 1e-3 and 200 steps.
    pub fn desk(n_categories: usize) -> Self {
        let mut c = Self {
            lr_g: 1e-3,
            lr_d: 1e-3,
            lr_e: 1e-3,
            max_steps: 200,
            length: LengthPrior::desk(),
            ..Self::default()
        };
        c.model.n_categories = n_categories;
        c.model.max_len = c.length.cap;
        c.baseline.steps = 300;
        c
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lr_g", self.lr_g), ("lr_d", self.lr_d), ("lr_e", self.lr_e)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.n_critic < 1 {
            return Err(Error::Config("n_critic must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        for (name, v) in [
            ("lambda_mi", self.lambda_mi),
            ("lambda_sup", self.lambda_sup),
            ("gp_lambda", self.gp_lambda),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.log_every < 1 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        self.model.validate()?;
        self.length.validate()?;
        if self.length.cap > self.model.max_len {
            return Err(Error::Config(format!(
                "length.cap ({}) exceeds model.max_len ({})",
                self.length.cap, self.model.max_len
            )));
        }
        self.baseline.validate()
    }

    pub fn seed_prior(&self) -> SeedPrior {
        SeedPrior {
            latent: LatentConfig {
                noise_dim: self.model.noise_dim,
                n_categories: self.model.n_categories,
            },
            length: self.length,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
