//! Directly supervised reference classifiers.
//!
//! [`CnnClassifier`] reuses the encoder's trunk and head shapes (plus dropout
//! after the dense layer), so its parameter count equals the encoder's.
//! [`RnnClassifier`] is a two-layer GRU read out at the last valid frame.
//! Both train on labeled sequences only.

use ndarray::{Array1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EpochSampler, SkeletonSequence};
use crate::nets::{argmax, log_softmax, softmax, Encoder, GruCell, GruStep, Linear, ModelConfig, Params, Trunk, TrunkScales};
use crate::training::{Adam, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Optimizer steps (fixed budget, no early stopping).
    pub steps: u64,
    pub dropout: f64,
    pub rnn_hidden: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            dropout: 0.1,
            rnn_hidden: 64,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("baseline.dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.rnn_hidden == 0 {
            return Err(Error::Config("baseline.rnn_hidden must be positive".into()));
        }
        Ok(())
    }
}

/// A sequence classifier with a softmax head.
pub trait Classifier {
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64>;

    fn posterior(&self, x: ArrayView2<f64>) -> Array1<f64> {
        softmax(self.logits(x).view())
    }

    /// Predicted class (ties to the lowest index) and posterior.
    fn classify(&self, x: ArrayView2<f64>) -> (usize, Array1<f64>) {
        let p = self.posterior(x);
        (argmax(p.view()), p)
    }
}

impl Classifier for Encoder<'_> {
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        Encoder::logits(self, x)
    }
}

/// Which baseline architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Cnn,
    Rnn,
}

/// Differentiable classifier used by the shared training loop.
trait Trainable: Classifier + Params + Clone {
    /// Adds `d loss / d params` for `dlogits = d loss / d logits` to `grad`
    /// after a training-mode forward pass.
    fn train_example<R: Rng + ?Sized>(&self, x: ArrayView2<f64>, label: usize, coeff: f64, grad: &mut Self, rng: &mut R) -> f64;
}

fn ce_cotangent(logits: &Array1<f64>, label: usize, coeff: f64) -> (f64, Array1<f64>) {
    let logp = log_softmax(logits.view());
    let mut d = logp.mapv(f64::exp);
    d[label] -= 1.0;
    (-logp[label], d * coeff)
}

// ---------------------------------------------------------------------------
// CNN
// ---------------------------------------------------------------------------

/// Convolutional classifier with the encoder's architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnClassifier {
    pub trunk: Trunk,
    pub head: Linear,
    pub dropout: f64,
}

impl CnnClassifier {
    pub fn new<R: Rng + ?Sized>(model: &ModelConfig, dropout: f64, rng: &mut R) -> Self {
        Self {
            trunk: Trunk::new(model.frame_dim, model.conv_filters, model.kernel_size, model.dense_units, rng),
            head: Linear::new(model.dense_units, model.n_categories, rng),
            dropout,
        }
    }
}

impl Classifier for CnnClassifier {
    /// Evaluation mode: dropout disabled.
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let f = self.trunk.features(x, &TrunkScales::IDENTITY);
        self.head.forward(f.view(), 1.0)
    }
}

impl Params for CnnClassifier {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = crate::nets::params::prefixed("trunk", self.trunk.tensors());
        v.extend(crate::nets::params::prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.trunk.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Trainable for CnnClassifier {
    fn train_example<R: Rng + ?Sized>(&self, x: ArrayView2<f64>, label: usize, coeff: f64, grad: &mut Self, rng: &mut R) -> f64 {
        let s = TrunkScales::IDENTITY;
        let cache = self.trunk.forward(x, &s);
        // Inverted dropout on the dense features.
        let keep = 1.0 - self.dropout;
        let mask = cache
            .features
            .mapv(|_| if self.dropout == 0.0 || rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
        let dropped = &cache.features * &mask;
        let logits = self.head.forward(dropped.view(), 1.0);
        let (loss, dlogits) = ce_cotangent(&logits, label, coeff);
        let ddropped = self.head.backward(dropped.view(), dlogits.view(), 1.0, Some(&mut grad.head));
        let dfeat = ddropped * &mask;
        self.trunk.backward(&cache, dfeat.view(), &s, Some(&mut grad.trunk), false);
        loss
    }
}

// ---------------------------------------------------------------------------
// RNN
// ---------------------------------------------------------------------------

/// Two stacked GRU layers read out at the last valid frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnClassifier {
    pub layer1: GruCell,
    pub layer2: GruCell,
    pub head: Linear,
}

impl RnnClassifier {
    pub fn new<R: Rng + ?Sized>(model: &ModelConfig, hidden: usize, rng: &mut R) -> Self {
        Self {
            layer1: GruCell::new(model.frame_dim, hidden, rng),
            layer2: GruCell::new(hidden, hidden, rng),
            head: Linear::new(hidden, model.n_categories, rng),
        }
    }

    fn unroll(&self, x: ArrayView2<f64>) -> (Vec<GruStep>, Vec<GruStep>) {
        assert!(x.nrows() >= 1, "classifier input needs at least one frame");
        let hidden = self.layer1.hidden();
        let mut h1 = Array1::zeros(hidden);
        let mut h2 = Array1::zeros(self.layer2.hidden());
        let mut s1 = Vec::with_capacity(x.nrows());
        let mut s2 = Vec::with_capacity(x.nrows());
        for row in x.outer_iter() {
            let a = self.layer1.step(row.to_owned(), &h1);
            h1 = a.h.clone();
            let b = self.layer2.step(h1.clone(), &h2);
            h2 = b.h.clone();
            s1.push(a);
            s2.push(b);
        }
        (s1, s2)
    }
}

impl Classifier for RnnClassifier {
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let (_, s2) = self.unroll(x);
        let h = &s2.last().expect("non-empty").h;
        self.head.forward(h.view(), 1.0)
    }
}

impl Params for RnnClassifier {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = crate::nets::params::prefixed("layer1", self.layer1.tensors());
        v.extend(crate::nets::params::prefixed("layer2", self.layer2.tensors()));
        v.extend(crate::nets::params::prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.tensors_mut();
        v.extend(self.layer2.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Trainable for RnnClassifier {
    fn train_example<R: Rng + ?Sized>(&self, x: ArrayView2<f64>, label: usize, coeff: f64, grad: &mut Self, _rng: &mut R) -> f64 {
        let (s1, s2) = self.unroll(x);
        let t_len = s2.len();
        let h_last = &s2[t_len - 1].h;
        let logits = self.head.forward(h_last.view(), 1.0);
        let (loss, dlogits) = ce_cotangent(&logits, label, coeff);
        let mut dh2 = self.head.backward(h_last.view(), dlogits.view(), 1.0, Some(&mut grad.head));

        let mut das2 = vec![Array1::zeros(0); t_len];
        let mut dh1_out = vec![Array1::zeros(0); t_len];
        for t in (0..t_len).rev() {
            let (da, dx, dh_prev) = self.layer2.backward_step(&s2[t], dh2.view());
            das2[t] = da;
            dh1_out[t] = dx;
            dh2 = dh_prev;
        }
        self.layer2.accumulate(&mut grad.layer2, &s2, &das2);

        let mut das1 = vec![Array1::zeros(0); t_len];
        let mut dh1 = Array1::zeros(self.layer1.hidden());
        for t in (0..t_len).rev() {
            let dh = &dh1_out[t] + &dh1;
            let (da, _dx, dh_prev) = self.layer1.backward_step(&s1[t], dh.view());
            das1[t] = da;
            dh1 = dh_prev;
        }
        self.layer1.accumulate(&mut grad.layer1, &s1, &das1);
        loss
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Mean training cross-entropy of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineMetrics {
    pub step: u64,
    pub loss: f64,
}

fn labeled_pool(train: &[SkeletonSequence], n_classes: usize) -> Result<Vec<(ndarray::Array2<f64>, usize)>> {
    let pool: Vec<_> = train
        .iter()
        .filter_map(|s| s.supervised_label().map(|y| (s, y)))
        .collect();
    if pool.is_empty() {
        return Err(Error::Config("baseline training needs at least one labeled sequence".into()));
    }
    pool.into_iter()
        .map(|(s, y)| {
            if y >= n_classes {
                return Err(Error::Data(format!("label {y} outside 0..{n_classes}")));
            }
            if s.is_empty() {
                return Err(Error::EmptySequence(format!("training sequence of subject {}", s.subject_id)));
            }
            Ok((s.to_matrix(), y))
        })
        .collect()
}

fn fit<M: Trainable>(
    mut model: M,
    train: &[SkeletonSequence],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(M, Vec<BaselineMetrics>)> {
    let pool = labeled_pool(train, config.model.n_categories)?;
    let sizes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut opt = Adam::new(&sizes, config.adam_beta1, config.adam_beta2);
    let mut sampler = EpochSampler::new(pool.len(), rng);
    let b = config.batch_size;
    let mut metrics = Vec::with_capacity(config.baseline.steps as usize);
    for step in 1..=config.baseline.steps {
        let idx = sampler.next_indices(b, rng);
        let mut grad = model.zeroed();
        let mut loss = 0.0;
        for &i in &idx {
            let (x, y) = &pool[i];
            loss += model.train_example(x.view(), *y, 1.0 / b as f64, &mut grad, rng) / b as f64;
        }
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite {
                step,
                detail: format!("baseline cross-entropy {loss} on sequences {idx:?}"),
            });
        }
        let g: Vec<&[f64]> = grad.tensors().into_iter().map(|(_, t)| t).collect();
        opt.step(model.tensors_mut(), &g, config.lr_e);
        metrics.push(BaselineMetrics { step, loss });
    }
    Ok((model, metrics))
}

/// Trains the CNN baseline on the labeled part of `train`.
pub fn train_cnn(train: &[SkeletonSequence], config: &TrainConfig) -> Result<(CnnClassifier, Vec<BaselineMetrics>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = CnnClassifier::new(&config.model, config.baseline.dropout, &mut rng);
    fit(model, train, config, &mut rng)
}

/// Trains the GRU baseline on the labeled part of `train`.
pub fn train_rnn(train: &[SkeletonSequence], config: &TrainConfig) -> Result<(RnnClassifier, Vec<BaselineMetrics>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = RnnClassifier::new(&config.model, config.baseline.rnn_hidden, &mut rng);
    fit(model, train, config, &mut rng)
}

/// Predicted class and posterior for one sequence.
pub fn classify<C: Classifier + ?Sized>(model: &C, sequence: &SkeletonSequence) -> (usize, Array1<f64>) {
    model.classify(sequence.to_matrix().view())
}
