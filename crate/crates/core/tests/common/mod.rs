#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skelgan::nets::{InfoGan, ModelConfig, Params};
use skelgan::training::{
    critic_grads, critic_objective, generator_adv_loss, generator_grads, gradient_penalty, mi_lower_bound,
    supervised_ce, CriticWeights, GeneratorWeights,
};
use skelgan::priors::LatentSeed;

pub const K: usize = 3;

/// Downscaled network: hidden size 4, two timesteps, three categories.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        frame_dim: 6,
        noise_dim: 3,
        n_categories: K,
        gru_hidden: 4,
        conv_filters: 4,
        kernel_size: 3,
        dense_units: 4,
        max_len: 2,
    }
}

pub fn tiny_model(spectral: bool, seed: u64) -> InfoGan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    InfoGan::new(tiny_config(), spectral, &mut rng)
}

pub fn random_sequences(n: usize, len: usize, dim: usize, seed: u64) -> Vec<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Array2::from_shape_fn((len, dim), |_| rng.random_range(-0.8..0.8)))
        .collect()
}

pub fn tiny_seeds(n: usize, seed: u64) -> Vec<LatentSeed> {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| LatentSeed {
            category: i % K,
            n_categories: K,
            noise: (0..cfg.noise_dim).map(|_| rng.random::<f64>()).collect(),
            length: 1 + i % cfg.max_len,
        })
        .collect()
}

/// Flattened parameter vector in `Params` order.
pub fn flat<P: Params>(p: &P) -> Vec<f64> {
    p.tensors().into_iter().flat_map(|(_, t)| t.to_vec()).collect()
}

pub fn set_flat<P: Params>(p: &mut P, idx: usize, value: f64) {
    let mut offset = 0;
    for t in p.tensors_mut() {
        if idx < offset + t.len() {
            t[idx - offset] = value;
            return;
        }
        offset += t.len();
    }
    panic!("parameter index {idx} out of range");
}

pub fn param_names<P: Params>(p: &P) -> Vec<String> {
    p.tensors()
        .into_iter()
        .flat_map(|(n, t)| (0..t.len()).map(move |i| format!("{n}[{i}]")))
        .collect()
}

/// Largest singular value (SVD oracle).
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(a.nrows(), a.ncols(), a.as_standard_layout().as_slice().unwrap());
    m.singular_values().max()
}

/// 3-class fixture small enough for a few training steps per test.
pub fn small_split(seed: u64, label_fraction: f64) -> skelgan::data::DatasetSplit {
    let split = skelgan::data::SynthSpec::new(3, 60, 30, seed)
        .with_length(skelgan::priors::LengthPrior::desk())
        .build();
    skelgan::data::mask_labels(split, label_fraction, seed).unwrap()
}

pub fn small_config() -> skelgan::training::TrainConfig {
    let mut c = skelgan::training::TrainConfig::desk(3);
    c.batch_size = 8;
    c.max_steps = 10;
    c.model.conv_filters = 16;
    c.model.dense_units = 16;
    c.model.gru_hidden = 16;
    c.model.noise_dim = 8;
    c.baseline.steps = 20;
    c
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks
// ---------------------------------------------------------------------------

const H: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Below this magnitude both gradients count as zero.
const FLOOR: f64 = 1e-6;

pub fn views(v: &[Array2<f64>]) -> Vec<ArrayView2<'_, f64>> {
    v.iter().map(|a| a.view()).collect()
}

/// Worst finite-difference mismatch of one loss term.
pub struct TermReport {
    pub term: &'static str,
    pub worst_rel: f64,
    pub worst_param: String,
    pub checked_nonzero: usize,
}

/// Central difference of `loss` w.r.t. parameter `idx`, re-estimating the
/// spectral scales with `u`, `v` held fixed.
fn numeric(model: &InfoGan, idx: usize, loss: &dyn Fn(&InfoGan) -> f64) -> f64 {
    let x0 = flat(model)[idx];
    let mut m = model.clone();
    set_flat(&mut m, idx, x0 + H);
    m.refresh_spectral(0);
    let up = loss(&m);
    set_flat(&mut m, idx, x0 - H);
    m.refresh_spectral(0);
    let down = loss(&m);
    (up - down) / (2.0 * H)
}

/// Compares every parameter whose name passes `select`.
fn check(
    term: &'static str,
    model: &InfoGan,
    analytic: &[f64],
    loss: &dyn Fn(&InfoGan) -> f64,
    select: &dyn Fn(&str) -> bool,
) -> TermReport {
    let names = param_names(model);
    assert_eq!(names.len(), analytic.len());
    let mut report = TermReport {
        term,
        worst_rel: 0.0,
        worst_param: String::new(),
        checked_nonzero: 0,
    };
    for (idx, pname) in names.iter().enumerate() {
        if !select(pname) {
            continue;
        }
        let n = numeric(model, idx, loss);
        let a = analytic[idx];
        let scale = a.abs().max(n.abs());
        if scale > FLOOR {
            report.checked_nonzero += 1;
        }
        let rel = (a - n).abs() / scale.max(FLOOR);
        if rel > report.worst_rel {
            report.worst_rel = rel;
            report.worst_param = pname.clone();
        }
    }
    report
}

fn all(_: &str) -> bool {
    true
}

/// Finite-difference check of the Wasserstein objective, gradient penalty,
/// adversarial, mutual-information and supervised terms on the tiny model.
pub fn gradient_report(spectral: bool) -> Vec<TermReport> {
    let mut out = Vec::new();
    let model = tiny_model(spectral, 11);
    let cfg = tiny_config();
    let real = random_sequences(3, 2, cfg.frame_dim, 1);
    // Fixed fake sequences of mixed length for the critic-side terms.
    let mut fake = random_sequences(3, 2, cfg.frame_dim, 2);
    fake[1] = fake[1].slice(ndarray::s![..1, ..]).to_owned();
    let eps = [0.3, 0.7, 0.55];
    let seeds = tiny_seeds(4, 3);
    let labels = [0usize, 2, 1];

    let (_, g) = critic_grads(
        &model,
        &views(&real),
        &views(&fake),
        None,
        CriticWeights {
            objective: 1.0,
            penalty: 0.0,
        },
    );
    let w = |m: &InfoGan| critic_objective(&views(&real), &views(&fake), &m.critic());
    out.push(check("wasserstein", &model, &flat(&g), &w, &all));

    let (_, g) = critic_grads(
        &model,
        &views(&real),
        &views(&fake),
        Some(&eps),
        CriticWeights {
            objective: 0.0,
            penalty: 1.0,
        },
    );
    let gp = |m: &InfoGan| gradient_penalty(&views(&real), &views(&fake), &eps, &m.critic());
    out.push(check("gradient penalty", &model, &flat(&g), &gp, &all));

    let generated = |m: &InfoGan| -> Vec<Array2<f64>> { seeds.iter().map(|s| m.generate(s).active().to_owned()).collect() };

    // The critic is frozen in the adversarial term: only the generator is
    // compared and the critic-side entries must be exactly zero.
    let (_, g) = generator_grads(
        &model,
        &seeds,
        &[],
        &[],
        GeneratorWeights {
            adversarial: 1.0,
            mi: 0.0,
            supervised: 0.0,
        },
    )
    .unwrap();
    let adv = |m: &InfoGan| generator_adv_loss(&views(&generated(m)), &m.critic());
    let is_gen = |n: &str| n.starts_with("generator.");
    out.push(check("adversarial", &model, &flat(&g), &adv, &is_gen));
    let leaked = param_names(&model)
        .iter()
        .zip(flat(&g))
        .any(|(n, v)| !is_gen(n) && v != 0.0);
    assert!(!leaked, "adversarial gradient reached the frozen critic");

    let codes: Vec<usize> = seeds.iter().map(|s| s.category).collect();
    let (_, g) = generator_grads(
        &model,
        &seeds,
        &[],
        &[],
        GeneratorWeights {
            adversarial: 0.0,
            mi: 1.0,
            supervised: 0.0,
        },
    )
    .unwrap();
    let mi = |m: &InfoGan| mi_lower_bound(&codes, &views(&generated(m)), &m.encoder(), K);
    out.push(check("mutual information", &model, &flat(&g), &mi, &all));

    let (_, g) = generator_grads(
        &model,
        &seeds,
        &views(&real),
        &labels,
        GeneratorWeights {
            adversarial: 0.0,
            mi: 0.0,
            supervised: 1.0,
        },
    )
    .unwrap();
    let ce = |m: &InfoGan| supervised_ce(&views(&real), &labels, &m.encoder()).unwrap();
    out.push(check("supervised cross-entropy", &model, &flat(&g), &ce, &all));
    out
}
