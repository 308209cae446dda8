//! Differentiable models: generator `G`, critic `D` and encoder `E`.
//!
//! `D` and `E` share one convolutional [`Trunk`] stored once in [`InfoGan`];
//! [`Critic`] and [`Encoder`] are borrowed views that add their own heads.
//! All gradients are written by hand and checked against finite differences
//! in the test suites.

pub mod conv;
pub mod generator;
pub mod gru;
pub mod linear;
pub mod params;
pub mod spectral;
pub mod trunk;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use conv::Conv1d;
pub use generator::{GeneratedSequence, Generator, GeneratorTrace};
pub use gru::{GruCell, GruStep};
pub use linear::Linear;
pub use params::Params;
pub use spectral::{spectral_normalize, CriticSpectral, SpectralState, CONVERGED_TOL, MAX_CONVERGE_ITERS};
pub use trunk::{Trunk, TrunkCache, TrunkScales};

use crate::priors::LatentSeed;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// `x / (1 + |x|)`.
pub fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

pub fn softsign_grad(x: f64) -> f64 {
    let d = 1.0 + x.abs();
    1.0 / (d * d)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.mapv(|v| (v - max).exp()).sum().ln();
    logits.mapv(|v| v - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv_into(f64::exp)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Values per frame (25 joints x 3 coordinates).
    pub frame_dim: usize,
    pub noise_dim: usize,
    pub n_categories: usize,
    pub gru_hidden: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub dense_units: usize,
    /// Generation horizon; frames past a seed's length are zero.
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frame_dim: 75,
            noise_dim: 64,
            n_categories: 60,
            gru_hidden: 64,
            conv_filters: 64,
            kernel_size: 5,
            dense_units: 64,
            max_len: 150,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("frame_dim", self.frame_dim),
            ("noise_dim", self.noise_dim),
            ("gru_hidden", self.gru_hidden),
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("dense_units", self.dense_units),
            ("max_len", self.max_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if self.n_categories < 2 {
            return Err(Error::Config("n_categories must be at least 2".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config("kernel_size must be odd for same padding".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// InfoGAN parameters and views
// ---------------------------------------------------------------------------

/// Power iterations used to warm up fresh spectral states.
pub const SPECTRAL_WARMUP_ITERS: usize = 50;

/// All parameters of the model: `theta_G`, the shared trunk, the critic head
/// (`theta_D` = trunk + critic head) and the encoder head (`theta_E` = trunk +
/// encoder head).
#[derive(Debug, Clone, PartialEq)]
pub struct InfoGan {
    pub config: ModelConfig,
    pub generator: Generator,
    pub trunk: Trunk,
    pub critic_head: Linear,
    pub encoder_head: Linear,
    /// Present when the critic path is spectrally normalized.
    pub spectral: Option<CriticSpectral>,
}

impl InfoGan {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, spectral_norm: bool, rng: &mut R) -> Self {
        let generator = Generator::new(
            config.frame_dim,
            config.noise_dim,
            config.n_categories,
            config.gru_hidden,
            rng,
        );
        let trunk = Trunk::new(
            config.frame_dim,
            config.conv_filters,
            config.kernel_size,
            config.dense_units,
            rng,
        );
        let critic_head = Linear::new(config.dense_units, 1, rng);
        let encoder_head = Linear::new(config.dense_units, config.n_categories, rng);
        let spectral = spectral_norm.then(|| CriticSpectral::new(&trunk, &critic_head, SPECTRAL_WARMUP_ITERS, rng));
        Self {
            config,
            generator,
            trunk,
            critic_head,
            encoder_head,
            spectral,
        }
    }

    fn trunk_scales(&self) -> TrunkScales {
        self.spectral
            .as_ref()
            .map_or(TrunkScales::IDENTITY, CriticSpectral::trunk_scales)
    }

    pub fn critic(&self) -> Critic<'_> {
        Critic {
            trunk: &self.trunk,
            head: &self.critic_head,
            scales: self.trunk_scales(),
            head_scale: self.spectral.as_ref().map_or(1.0, CriticSpectral::head_scale),
        }
    }

    pub fn encoder(&self) -> Encoder<'_> {
        Encoder {
            trunk: &self.trunk,
            head: &self.encoder_head,
            scales: self.trunk_scales(),
        }
    }

    pub fn generate(&self, seed: &LatentSeed) -> GeneratedSequence {
        self.generator.generate(seed, self.config.max_len)
    }

    /// Power-iterates every spectral state `n_iters` times.
    pub fn refresh_spectral(&mut self, n_iters: usize) {
        if let Some(sn) = self.spectral.as_mut() {
            sn.refresh(&self.trunk, &self.critic_head, n_iters);
        }
    }

    /// Runs power iteration to convergence (at least `min_iters` steps).
    pub fn converge_spectral(&mut self, min_iters: usize) {
        if let Some(sn) = self.spectral.as_mut() {
            sn.converge(&self.trunk, &self.critic_head, min_iters);
        }
    }

    /// Effective (normalized) critic-path matrices, in the order conv1,
    /// conv2, dense, head.
    pub fn critic_path_matrices(&self) -> Vec<Array2<f64>> {
        let c = self.critic();
        vec![
            &self.trunk.conv1.w * c.scales.conv1,
            &self.trunk.conv2.w * c.scales.conv2,
            &self.trunk.dense.w * c.scales.dense,
            &self.critic_head.w * c.head_scale,
        ]
    }
}

impl Params for InfoGan {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = params::prefixed("generator", self.generator.tensors());
        v.extend(params::prefixed("trunk", self.trunk.tensors()));
        v.extend(params::prefixed("critic_head", self.critic_head.tensors()));
        v.extend(params::prefixed("encoder_head", self.encoder_head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.generator.tensors_mut();
        v.extend(self.trunk.tensors_mut());
        v.extend(self.critic_head.tensors_mut());
        v.extend(self.encoder_head.tensors_mut());
        v
    }
}

/// Critic `D`: shared trunk followed by an unbounded scalar head.
#[derive(Debug, Clone, Copy)]
pub struct Critic<'a> {
    pub trunk: &'a Trunk,
    pub head: &'a Linear,
    pub scales: TrunkScales,
    pub head_scale: f64,
}

impl Critic<'_> {
    /// Score of the active (unmasked) frames.
    pub fn score(&self, x: ArrayView2<f64>) -> f64 {
        self.score_traced(x).0
    }

    pub fn score_traced(&self, x: ArrayView2<f64>) -> (f64, TrunkCache) {
        let cache = self.trunk.forward(x, &self.scales);
        let s = self.head.forward(cache.features.view(), self.head_scale)[0];
        (s, cache)
    }

    /// Feature cotangent of the score, `d score / d features`.
    pub fn feature_cotangent(&self) -> Array1<f64> {
        self.head.w.row(0).to_owned() * self.head_scale
    }

    /// Score and its gradient w.r.t. the input frames.
    pub fn score_and_input_grad(&self, x: ArrayView2<f64>) -> (f64, Array2<f64>) {
        let (s, cache) = self.score_traced(x);
        let dx = self
            .trunk
            .backward(&cache, self.feature_cotangent().view(), &self.scales, None, true)
            .expect("requested");
        (s, dx)
    }
}

/// Encoder `E`: shared trunk followed by a softmax over the salient
/// categories.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    pub trunk: &'a Trunk,
    pub head: &'a Linear,
    pub scales: TrunkScales,
}

impl Encoder<'_> {
    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let f = self.trunk.features(x, &self.scales);
        self.head.forward(f.view(), 1.0)
    }

    pub fn posterior(&self, x: ArrayView2<f64>) -> Array1<f64> {
        softmax(self.logits(x).view())
    }
}

/// `D(x)` on the first `length` frames of a padded sequence.
pub fn critic_score(x: ArrayView2<f64>, length: usize, model: &InfoGan) -> f64 {
    model.critic().score(x.slice(ndarray::s![..length, ..]))
}

/// `p_E(c | x)` on the first `length` frames of a padded sequence.
pub fn encoder_posterior(x: ArrayView2<f64>, length: usize, model: &InfoGan) -> Array1<f64> {
    model.encoder().posterior(x.slice(ndarray::s![..length, ..]))
}

/// Trunk features on the first `length` frames of a padded sequence.
pub fn trunk_forward(x: ArrayView2<f64>, length: usize, trunk: &Trunk, scales: &TrunkScales) -> Array1<f64> {
    trunk.features(x.slice(ndarray::s![..length, ..]), scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softsign_values() {
        assert_eq!(softsign(0.0), 0.0);
        assert_eq!(softsign(1.0), 0.5);
        for x in [-1e300, -5.0, 3.0, 1e300] {
            let y = softsign(x);
            assert!(y > -1.0 && y < 1.0 || x.abs() > 1e15);
        }
        assert!(softsign(1e6) < 1.0);
    }

    #[test]
    fn softmax_properties() {
        let p = softmax(Array1::zeros(60).view());
        assert!(p.iter().all(|&v| (v - 1.0 / 60.0).abs() < 1e-15));
        let l = array![0.3, -2.0, 5.5, 1.0];
        let p = softmax(l.view());
        assert!((p.sum() - 1.0).abs() < 1e-9);
        let shifted = l.mapv(|v| v + 123.0);
        assert_eq!(argmax(softmax(shifted.view()).view()), argmax(p.view()));
    }

    #[test]
    fn argmax_ties_to_lowest_index() {
        assert_eq!(argmax(array![0.2, 0.5, 0.5, 0.1].view()), 1);
        assert_eq!(argmax(Array1::from_elem(60, 1.0 / 60.0).view()), 0);
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            frame_dim: 6,
            noise_dim: 3,
            n_categories: 3,
            gru_hidden: 4,
            conv_filters: 4,
            kernel_size: 3,
            dense_units: 4,
            max_len: 12,
        }
    }

    #[test]
    fn zero_critic_head_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = InfoGan::new(small_config(), false, &mut rng);
        model.critic_head = Linear::zeros(4, 1);
        let x = Array2::from_elem((5, 6), 0.7);
        assert_eq!(model.critic().score(x.view()), 0.0);
    }

    #[test]
    fn critic_head_is_affine_in_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = InfoGan::new(small_config(), false, &mut rng);
        model.critic_head = Linear {
            w: array![[0.5, -2.0, 0.0, 0.0]],
            b: array![0.25],
        };
        let x = Array2::from_shape_fn((5, 6), |(i, j)| (i as f64 - j as f64) * 0.1);
        let f = model.trunk.features(x.view(), &TrunkScales::IDENTITY);
        let expected = 0.5 * f[0] - 2.0 * f[1] + 0.25;
        assert!((model.critic().score(x.view()) - expected).abs() < 1e-15);
    }

    #[test]
    fn trunk_is_shared_storage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = InfoGan::new(small_config(), true, &mut rng);
        assert!(std::ptr::eq(model.critic().trunk, model.encoder().trunk));
        let x = Array2::from_shape_fn((6, 6), |(i, j)| ((i * j) as f64 * 0.3).sin());
        let (s0, p0) = (model.critic().score(x.view()), model.encoder().posterior(x.view()));
        model.trunk.dense.b[0] += 0.5;
        let (s1, p1) = (model.critic().score(x.view()), model.encoder().posterior(x.view()));
        assert_ne!(s0, s1);
        assert_ne!(p0, p1);
    }
}
