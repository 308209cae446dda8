//! Analytic gradients of the training losses for [`InfoGan`].
//!
//! Gradients are returned w.r.t. the raw parameters: when the critic path
//! is spectrally normalized the gradient w.r.t. `W / sigma` is pulled back
//! through the normalization with the current `u`, `v` held fixed.

use ndarray::{Array1, ArrayView2};

use super::losses::interpolate;
use crate::nets::{log_softmax, Generator, InfoGan, Linear, Params, Trunk};
use crate::priors::{salient_entropy, LatentSeed};
use crate::{Error, Result};

/// Gradient container with the same tensor layout as [`InfoGan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub generator: Generator,
    pub trunk: Trunk,
    pub critic_head: Linear,
    pub encoder_head: Linear,
}

impl ModelGrads {
    pub fn zeros_like(model: &InfoGan) -> Self {
        Self {
            generator: model.generator.zeroed(),
            trunk: model.trunk.zeroed(),
            critic_head: model.critic_head.zeroed(),
            encoder_head: model.encoder_head.zeroed(),
        }
    }
}

impl Params for ModelGrads {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = self.generator.tensors();
        v.extend(self.trunk.tensors());
        v.extend(self.critic_head.tensors());
        v.extend(self.encoder_head.tensors());
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

/// Coefficients of the critic-side loss `objective * W(real, fake) + penalty * GP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticWeights {
    pub objective: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticTerms {
    /// `E[D(real)] - E[D(fake)]`.
    pub objective: f64,
    /// Gradient penalty, when mixing weights were given.
    pub penalty: Option<f64>,
}

/// Gradient of the critic loss w.r.t. the trunk and the critic head.
///
/// `eps` enables the gradient penalty on interpolates of the paired
/// `real[i]`, `fake[i]`.
pub fn critic_grads(
    model: &InfoGan,
    real: &[ArrayView2<f64>],
    fake: &[ArrayView2<f64>],
    eps: Option<&[f64]>,
    weights: CriticWeights,
) -> (CriticTerms, ModelGrads) {
    assert!(!real.is_empty() && !fake.is_empty(), "empty critic batch");
    let critic = model.critic();
    let mut grads = ModelGrads::zeros_like(model);
    let dfeat_unit = critic.feature_cotangent();

    let accumulate_score = |x: ArrayView2<f64>, coeff: f64, grads: &mut ModelGrads| -> f64 {
        let (s, cache) = critic.score_traced(x);
        critic.head.backward(
            cache.features.view(),
            Array1::from_elem(1, coeff).view(),
            critic.head_scale,
            Some(&mut grads.critic_head),
        );
        let dfeat = &dfeat_unit * coeff;
        critic
            .trunk
            .backward(&cache, dfeat.view(), &critic.scales, Some(&mut grads.trunk), false);
        s
    };

    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    let mut objective = 0.0;
    for x in real {
        objective += accumulate_score(x.view(), weights.objective / nr, &mut grads) / nr;
    }
    for x in fake {
        objective -= accumulate_score(x.view(), -weights.objective / nf, &mut grads) / nf;
    }

    let penalty = eps.map(|eps| {
        assert!(real.len() == fake.len() && fake.len() == eps.len(), "paired batches");
        let b = eps.len() as f64;
        let mut total = 0.0;
        for ((r, f), &e) in real.iter().zip(fake).zip(eps) {
            let x_hat = interpolate(r.view(), f.view(), e);
            let cache = critic.trunk.forward(x_hat.view(), &critic.scales);
            let g = critic
                .trunk
                .backward(&cache, dfeat_unit.view(), &critic.scales, None, true)
                .expect("requested");
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += (norm - 1.0).powi(2) / b;
            if norm > 0.0 {
                // d||g||/dtheta = (H_theta,x g) / ||g||.
                let coeff = weights.penalty * 2.0 * (norm - 1.0) / norm / b;
                let (t_trunk, t_feat) = critic.trunk.param_grad_tangent(&cache, dfeat_unit.view(), g.view(), &critic.scales);
                grads.trunk.add_scaled(&t_trunk, coeff);
                grads.critic_head.w.row_mut(0).scaled_add(coeff, &t_feat);
            }
        }
        total
    });

    if let Some(sn) = &model.spectral {
        sn.backprop_trunk(&model.trunk, &mut grads.trunk);
        sn.backprop_head(&model.critic_head, &mut grads.critic_head);
    }
    (CriticTerms { objective, penalty }, grads)
}

/// Coefficients of the generator/encoder-side loss
/// `adversarial * L_adv + mi * I_lb + supervised * CE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorWeights {
    pub adversarial: f64,
    pub mi: f64,
    pub supervised: f64,
}

impl GeneratorWeights {
    /// The joint update's weights: `L_adv - lambda_mi * I_lb + lambda_sup * CE`.
    pub fn joint(lambda_mi: f64, lambda_sup: f64) -> Self {
        Self {
            adversarial: 1.0,
            mi: -lambda_mi,
            supervised: lambda_sup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorTerms {
    pub adversarial: f64,
    pub mi_lower_bound: f64,
    pub supervised_ce: f64,
    /// Weighted loss accumulated sample by sample, independently of the
    /// three terms above.
    pub total: f64,
}

/// Gradient of the generator/encoder-side loss.
///
/// The adversarial term reaches only the generator (the critic is frozen).
/// The MI term reaches the generator, the trunk and the encoder head; the
/// supervised term reaches the trunk and the encoder head.
pub fn generator_grads(
    model: &InfoGan,
    seeds: &[LatentSeed],
    labeled: &[ArrayView2<f64>],
    labels: &[usize],
    weights: GeneratorWeights,
) -> Result<(GeneratorTerms, ModelGrads)> {
    assert!(!seeds.is_empty(), "empty generator batch");
    assert_eq!(labeled.len(), labels.len(), "one label per sequence");
    let k = model.config.n_categories;
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Data(format!("label {bad} outside 0..{k} for supervised cross-entropy")));
    }
    let critic = model.critic();
    let encoder = model.encoder();
    let scales = encoder.scales;
    let mut grads = ModelGrads::zeros_like(model);
    let h_c = salient_entropy(k);
    let dfeat_critic = critic.feature_cotangent();

    let b = seeds.len() as f64;
    let (mut adversarial, mut mi, mut total) = (0.0, 0.0, 0.0);
    for seed in seeds {
        let (frames, trace) = model.generator.generate_traced(seed);
        let cache = model.trunk.forward(frames.view(), &scales);
        let score = critic.head.forward(cache.features.view(), critic.head_scale)[0];
        let logits = encoder.head.forward(cache.features.view(), 1.0);
        let logp = log_softmax(logits.view());
        adversarial -= score / b;
        mi += logp[seed.category] / b;
        total += (weights.adversarial * -score + weights.mi * (logp[seed.category] + h_c)) / b;

        // MI: d(w * log p[c] / b) / d logits = w / b * (onehot - p).
        let mut dlogits = logp.mapv(|l| -l.exp());
        dlogits[seed.category] += 1.0;
        dlogits *= weights.mi / b;
        let dfeat_mi = encoder
            .head
            .backward(cache.features.view(), dlogits.view(), 1.0, Some(&mut grads.encoder_head));
        let mut dx = model
            .trunk
            .backward(&cache, dfeat_mi.view(), &scales, Some(&mut grads.trunk), true)
            .expect("requested");
        if weights.adversarial != 0.0 {
            let dfeat_adv = &dfeat_critic * (-weights.adversarial / b);
            dx += &model
                .trunk
                .backward(&cache, dfeat_adv.view(), &scales, None, true)
                .expect("requested");
        }
        debug_assert_eq!(dx.dim(), frames.dim());
        model.generator.backward(&trace, dx.view(), &mut grads.generator);
    }
    mi += h_c;

    let mut supervised = 0.0;
    if !labeled.is_empty() {
        let nl = labeled.len() as f64;
        for (x, &y) in labeled.iter().zip(labels) {
            let cache = model.trunk.forward(x.view(), &scales);
            let logits = encoder.head.forward(cache.features.view(), 1.0);
            let logp = log_softmax(logits.view());
            supervised -= logp[y] / nl;
            total += weights.supervised * -logp[y] / nl;
            let mut dlogits = logp.mapv(f64::exp);
            dlogits[y] -= 1.0;
            dlogits *= weights.supervised / nl;
            let dfeat = encoder
                .head
                .backward(cache.features.view(), dlogits.view(), 1.0, Some(&mut grads.encoder_head));
            model
                .trunk
                .backward(&cache, dfeat.view(), &scales, Some(&mut grads.trunk), false);
        }
    }

    if let Some(sn) = &model.spectral {
        sn.backprop_trunk(&model.trunk, &mut grads.trunk);
    }
    Ok((
        GeneratorTerms {
            adversarial,
            mi_lower_bound: mi,
            supervised_ce: supervised,
            total,
        },
        grads,
    ))
}

/// Slices of the tensors updated by the critic optimizer (trunk, critic head).
pub(crate) fn critic_tensors(g: &ModelGrads) -> Vec<&[f64]> {
    let mut v: Vec<&[f64]> = g.trunk.tensors().into_iter().map(|(_, t)| t).collect();
    v.extend(g.critic_head.tensors().into_iter().map(|(_, t)| t));
    v
}

/// Slices of the tensors updated by the encoder optimizer (trunk, encoder head).
pub(crate) fn encoder_tensors(g: &ModelGrads) -> Vec<&[f64]> {
    let mut v: Vec<&[f64]> = g.trunk.tensors().into_iter().map(|(_, t)| t).collect();
    v.extend(g.encoder_head.tensors().into_iter().map(|(_, t)| t));
    v
}

pub(crate) fn generator_tensors(g: &ModelGrads) -> Vec<&[f64]> {
    g.generator.tensors().into_iter().map(|(_, t)| t).collect()
}
