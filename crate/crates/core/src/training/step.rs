//! One alternating optimization step: `n_critic` critic updates followed by
//! a joint generator/encoder update.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{LipschitzMode, TrainConfig};
use super::grads::{
    critic_grads, critic_tensors, encoder_tensors, generator_grads, generator_tensors, CriticWeights,
    GeneratorWeights, ModelGrads,
};
use super::optim::Adam;
use crate::data::{EpochSampler, SkeletonSequence};
use crate::nets::{InfoGan, Params};
use crate::priors::LatentSeed;
use crate::{Error, Result};

/// Training sequences converted once to `f64` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub sequences: Vec<Array2<f64>>,
    pub labels: Vec<Option<usize>>,
    /// Indices of sequences whose label may be used.
    pub labeled: Vec<usize>,
}

impl TrainData {
    pub fn new(train: &[SkeletonSequence]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        if let Some(s) = train.iter().find(|s| s.is_empty()) {
            return Err(Error::EmptySequence(format!("training sequence of subject {}", s.subject_id)));
        }
        let labels: Vec<Option<usize>> = train.iter().map(SkeletonSequence::supervised_label).collect();
        Ok(Self {
            sequences: train.iter().map(SkeletonSequence::to_matrix).collect(),
            labeled: (0..labels.len()).filter(|&i| labels[i].is_some()).collect(),
            labels,
        })
    }
}

/// Loss values of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub step: u64,
    /// Seconds spent inside training steps since the run started.
    pub wall_clock_s: f64,
    /// Mean of `E[D(real)] - E[D(fake)]` over the step's critic updates.
    pub critic_wasserstein: f64,
    pub gen_adversarial: f64,
    pub mi_lower_bound: f64,
    pub supervised_ce: f64,
    /// Mean penalty over the critic updates in gradient-penalty mode.
    pub gradient_penalty: Option<f64>,
    /// `gen_adversarial - lambda_mi * mi_lower_bound + lambda_sup * supervised_ce`,
    /// accumulated per sample.
    pub generator_total: f64,
    pub critic_updates: usize,
}

/// What was being computed when a loss or gradient became non-finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonFiniteDump {
    pub step: u64,
    pub phase: String,
    pub values: Vec<(String, f64)>,
    pub real_indices: Vec<usize>,
    pub real_lengths: Vec<usize>,
    pub seed_categories: Vec<usize>,
    pub seed_lengths: Vec<usize>,
    /// Flattened frames of the offending real batch.
    pub real_frames: Vec<Vec<f64>>,
}

impl NonFiniteDump {
    fn error(&self) -> Error {
        let values: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        Error::NonFinite {
            step: self.step,
            detail: format!(
                "{} ({}); real batch lengths {:?}",
                self.phase,
                values.join(", "),
                self.real_lengths
            ),
        }
    }
}

/// Everything that changes during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: InfoGan,
    /// Critic optimizer over trunk + critic head.
    pub opt_d: Adam,
    /// Encoder optimizer over trunk + encoder head.
    pub opt_e: Adam,
    pub opt_g: Adam,
    pub rng: ChaCha8Rng,
    /// Completed steps.
    pub step: u64,
    pub elapsed_s: f64,
    pub real_sampler: EpochSampler,
    pub labeled_sampler: Option<EpochSampler>,
    /// Diagnostics of the last non-finite failure.
    pub failure: Option<NonFiniteDump>,
}

fn sizes(tensors: Vec<&[f64]>) -> Vec<usize> {
    tensors.iter().map(|t| t.len()).collect()
}

impl TrainState {
    pub fn new(config: &TrainConfig, data: &TrainData) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let spectral = config.lipschitz_mode == LipschitzMode::SpectralNorm;
        let model = InfoGan::new(config.model, spectral, &mut rng);
        let real_sampler = EpochSampler::new(data.sequences.len(), &mut rng);
        let labeled_sampler = (!data.labeled.is_empty()).then(|| EpochSampler::new(data.labeled.len(), &mut rng));
        Ok(Self::assemble(config, model, rng, real_sampler, labeled_sampler))
    }

    /// A state with the shapes implied by `config` and the given samplers;
    /// parameter values are placeholders to be overwritten.
    pub(crate) fn with_shapes(
        config: &TrainConfig,
        real_sampler: EpochSampler,
        labeled_sampler: Option<EpochSampler>,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let spectral = config.lipschitz_mode == LipschitzMode::SpectralNorm;
        let model = InfoGan::new(config.model, spectral, &mut rng);
        Ok(Self::assemble(config, model, rng, real_sampler, labeled_sampler))
    }

    fn assemble(
        config: &TrainConfig,
        model: InfoGan,
        rng: ChaCha8Rng,
        real_sampler: EpochSampler,
        labeled_sampler: Option<EpochSampler>,
    ) -> Self {
        let probe = ModelGrads::zeros_like(&model);
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        Self {
            opt_d: Adam::new(&sizes(critic_tensors(&probe)), b1, b2),
            opt_e: Adam::new(&sizes(encoder_tensors(&probe)), b1, b2),
            opt_g: Adam::new(&sizes(generator_tensors(&probe)), b1, b2),
            model,
            rng,
            step: 0,
            elapsed_s: 0.0,
            real_sampler,
            labeled_sampler,
            failure: None,
        }
    }

    fn fail<T>(&mut self, dump: NonFiniteDump) -> Result<T> {
        let err = dump.error();
        self.failure = Some(dump);
        Err(err)
    }

    /// Runs one step and returns its metrics. On a non-finite loss or
    /// gradient the parameters are left as they were before the failing
    /// update, [`TrainState::failure`] holds the diagnostics and
    /// [`Error::NonFinite`] is returned.
    pub fn train_step(&mut self, data: &TrainData, config: &TrainConfig) -> Result<TrainMetrics> {
        let started = Instant::now();
        let prior = config.seed_prior();
        let b = config.batch_size;
        let gp = config.lipschitz_mode == LipschitzMode::GradientPenalty;
        let step = self.step + 1;

        let mut wasserstein = 0.0;
        let mut penalty = 0.0;
        for it in 0..config.n_critic {
            self.model.refresh_spectral(config.sn_power_iters);
            let idx = self.real_sampler.next_indices(b, &mut self.rng);
            let seeds = prior.sample_n(&mut self.rng, b);
            let fakes: Vec<Array2<f64>> = seeds
                .iter()
                .map(|s| self.model.generator.generate_traced(s).0)
                .collect();
            let eps: Option<Vec<f64>> = gp.then(|| (0..b).map(|_| self.rng.random::<f64>()).collect());
            let real: Vec<ArrayView2<f64>> = idx.iter().map(|&i| data.sequences[i].view()).collect();
            let fake: Vec<ArrayView2<f64>> = fakes.iter().map(|f| f.view()).collect();
            let weights = CriticWeights {
                objective: -1.0,
                penalty: config.gp_lambda,
            };
            let (terms, grads) = critic_grads(&self.model, &real, &fake, eps.as_deref(), weights);
            let finite = terms.objective.is_finite() && terms.penalty.is_none_or(f64::is_finite) && grads.is_finite();
            if !finite {
                let mut values = vec![("critic_wasserstein".to_string(), terms.objective)];
                values.extend(terms.penalty.map(|p| ("gradient_penalty".to_string(), p)));
                return self.fail(dump(step, format!("critic update {}", it + 1), values, data, &idx, &seeds));
            }
            wasserstein += terms.objective;
            penalty += terms.penalty.unwrap_or(0.0);
            let mut params = self.model.trunk.tensors_mut();
            params.extend(self.model.critic_head.tensors_mut());
            self.opt_d.step(params, &critic_tensors(&grads), config.lr_d);
        }

        self.model.refresh_spectral(config.sn_power_iters);
        let seeds = prior.sample_n(&mut self.rng, b);
        let labeled_idx: Vec<usize> = match &mut self.labeled_sampler {
            Some(sampler) if config.lambda_sup > 0.0 => sampler
                .next_indices(b, &mut self.rng)
                .into_iter()
                .map(|i| data.labeled[i])
                .collect(),
            _ => Vec::new(),
        };
        let labeled: Vec<ArrayView2<f64>> = labeled_idx.iter().map(|&i| data.sequences[i].view()).collect();
        let labels: Vec<usize> = labeled_idx
            .iter()
            .map(|&i| data.labels[i].expect("labeled index"))
            .collect();
        let weights = GeneratorWeights::joint(config.lambda_mi, config.lambda_sup);
        let (terms, grads) = generator_grads(&self.model, &seeds, &labeled, &labels, weights)?;
        let finite = [terms.adversarial, terms.mi_lower_bound, terms.supervised_ce, terms.total]
            .iter()
            .all(|v| v.is_finite())
            && grads.is_finite();
        if !finite {
            let values = vec![
                ("gen_adversarial".to_string(), terms.adversarial),
                ("mi_lower_bound".to_string(), terms.mi_lower_bound),
                ("supervised_ce".to_string(), terms.supervised_ce),
            ];
            return self.fail(dump(step, "joint generator/encoder update".into(), values, data, &labeled_idx, &seeds));
        }
        self.opt_g
            .step(self.model.generator.tensors_mut(), &generator_tensors(&grads), config.lr_g);
        let mut params = self.model.trunk.tensors_mut();
        params.extend(self.model.encoder_head.tensors_mut());
        self.opt_e.step(params, &encoder_tensors(&grads), config.lr_e);
        self.model.converge_spectral(config.sn_power_iters);

        self.step = step;
        self.elapsed_s += started.elapsed().as_secs_f64();
        let n = config.n_critic as f64;
        Ok(TrainMetrics {
            step,
            wall_clock_s: self.elapsed_s,
            critic_wasserstein: wasserstein / n,
            gen_adversarial: terms.adversarial,
            mi_lower_bound: terms.mi_lower_bound,
            supervised_ce: terms.supervised_ce,
            gradient_penalty: gp.then_some(penalty / n),
            generator_total: terms.total,
            critic_updates: config.n_critic,
        })
    }
}

fn dump(
    step: u64,
    phase: String,
    values: Vec<(String, f64)>,
    data: &TrainData,
    idx: &[usize],
    seeds: &[LatentSeed],
) -> NonFiniteDump {
    NonFiniteDump {
        step,
        phase,
        values,
        real_indices: idx.to_vec(),
        real_lengths: idx.iter().map(|&i| data.sequences[i].nrows()).collect(),
        seed_categories: seeds.iter().map(|s| s.category).collect(),
        seed_lengths: seeds.iter().map(|s| s.length).collect(),
        real_frames: idx.iter().map(|&i| data.sequences[i].iter().copied().collect()).collect(),
    }
}
