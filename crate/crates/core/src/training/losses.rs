//! Loss values of the Wasserstein InfoGAN objective.
//!
//! The functions here only evaluate losses. They are written against the
//! small [`SequenceCritic`] / [`SequenceEncoder`] traits so that hand-made
//! critics (constant, linear) can serve as closed-form oracles. Gradients
//! of the same quantities for the real model live in [`super::grads`].

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::nets::{log_softmax, Critic, Encoder};
use crate::priors::salient_entropy;
use crate::{Error, Result};

/// Anything that scores a `(T, frame_dim)` sequence.
pub trait SequenceCritic {
    fn score(&self, x: ArrayView2<f64>) -> f64;
    /// `d score / d x`, same shape as `x`.
    fn input_grad(&self, x: ArrayView2<f64>) -> Array2<f64>;
}

/// Anything that maps a sequence to a categorical posterior.
pub trait SequenceEncoder {
    fn log_posterior(&self, x: ArrayView2<f64>) -> Array1<f64>;
}

impl SequenceCritic for Critic<'_> {
    fn score(&self, x: ArrayView2<f64>) -> f64 {
        Critic::score(self, x)
    }

    fn input_grad(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.score_and_input_grad(x).1
    }
}

impl SequenceEncoder for Encoder<'_> {
    fn log_posterior(&self, x: ArrayView2<f64>) -> Array1<f64> {
        log_softmax(self.logits(x).view())
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    assert!(n > 0, "loss over an empty batch");
    values.sum::<f64>() / n as f64
}

/// `E[D(real)] - E[D(fake)]`, the critic's Wasserstein estimate. The critic
/// update maximizes it.
pub fn critic_objective<C: SequenceCritic + ?Sized>(
    real: &[ArrayView2<f64>],
    fake: &[ArrayView2<f64>],
    critic: &C,
) -> f64 {
    mean(real.iter().map(|x| critic.score(x.view()))) - mean(fake.iter().map(|x| critic.score(x.view())))
}

/// `-E[D(fake)]`, minimized by the generator with the critic frozen.
pub fn generator_adv_loss<C: SequenceCritic + ?Sized>(fake: &[ArrayView2<f64>], critic: &C) -> f64 {
    -mean(fake.iter().map(|x| critic.score(x.view())))
}

/// Variational lower bound on `I(c; G(c, z))`:
/// `E[log p_E(c | x_g)] + H(c)` with `H(c) = ln K` for a uniform code.
pub fn mi_lower_bound<E: SequenceEncoder + ?Sized>(
    codes: &[usize],
    fake: &[ArrayView2<f64>],
    encoder: &E,
    n_categories: usize,
) -> f64 {
    assert_eq!(codes.len(), fake.len(), "one code per generated sequence");
    let log_probs = codes.iter().zip(fake).map(|(&c, x)| encoder.log_posterior(x.view())[c]);
    mean(log_probs) + salient_entropy(n_categories)
}

/// Mean negative log-likelihood of the labels under the encoder. An empty
/// labeled batch contributes exactly zero.
pub fn supervised_ce<E: SequenceEncoder + ?Sized>(
    labeled: &[ArrayView2<f64>],
    labels: &[usize],
    encoder: &E,
) -> Result<f64> {
    assert_eq!(labeled.len(), labels.len(), "one label per sequence");
    if labeled.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, &y) in labeled.iter().zip(labels) {
        let logp = encoder.log_posterior(x.view());
        if y >= logp.len() {
            return Err(Error::Data(format!(
                "label {y} outside 0..{} for supervised cross-entropy",
                logp.len()
            )));
        }
        total -= logp[y];
    }
    Ok(total / labeled.len() as f64)
}

/// `eps * real + (1 - eps) * fake`, both zero-padded to the longer length.
pub fn interpolate(real: ArrayView2<f64>, fake: ArrayView2<f64>, eps: f64) -> Array2<f64> {
    assert_eq!(real.ncols(), fake.ncols());
    let len = real.nrows().max(fake.nrows());
    let mut out = Array2::zeros((len, real.ncols()));
    out.slice_mut(s![..real.nrows(), ..]).scaled_add(eps, &real);
    out.slice_mut(s![..fake.nrows(), ..]).scaled_add(1.0 - eps, &fake);
    out
}

/// `E[(||grad_x D(x_hat)|| - 1)^2]` over per-pair interpolates with mixing
/// weights `eps`.
pub fn gradient_penalty<C: SequenceCritic + ?Sized>(
    real: &[ArrayView2<f64>],
    fake: &[ArrayView2<f64>],
    eps: &[f64],
    critic: &C,
) -> f64 {
    assert!(real.len() == fake.len() && fake.len() == eps.len(), "paired batches");
    let terms = real.iter().zip(fake).zip(eps).map(|((r, f), &e)| {
        let x_hat = interpolate(r.view(), f.view(), e);
        let g = critic.input_grad(x_hat.view());
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        (norm - 1.0).powi(2)
    });
    mean(terms)
}
