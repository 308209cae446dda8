mod common;

use common::*;
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skelgan::baselines::{train_cnn, train_rnn, Classifier, CnnClassifier};
use skelgan::data::{mask_labels, split_cross_subject, SkeletonSequence, SynthSpec};
use skelgan::eval::{export_sequences, SequenceRecord};
use skelgan::nets::{trunk_forward, InfoGan, Params};
use skelgan::priors::{LengthPrior, SeedPrior};
use skelgan::training::{
    generator_grads, read_checkpoint, train_run, write_checkpoint, GeneratorWeights, LipschitzMode, TrainData,
    TrainState,
};

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

#[test]
fn logged_parts_reconstruct_generator_loss() {
    let split = small_split(3, 0.5);
    let mut config = small_config();
    config.lambda_mi = 0.7;
    config.lambda_sup = 1.3;
    let run = train_run(&split, &config, None).unwrap();
    for m in &run.metrics {
        let rebuilt = m.gen_adversarial - config.lambda_mi * m.mi_lower_bound + config.lambda_sup * m.supervised_ce;
        assert!((m.generator_total - rebuilt).abs() < 1e-9, "step {}: {} vs {rebuilt}", m.step, m.generator_total);
    }
}

#[test]
fn mi_gradient_reaches_generator() {
    let model = tiny_model(true, 4);
    let seeds = tiny_seeds(6, 8);
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
    let mut stepped = model.generator.clone();
    stepped.add_scaled(&g.generator, -1e-2);
    assert_ne!(flat(&stepped), flat(&model.generator));
}

#[test]
fn no_labels_means_no_supervised_gradient() {
    let model = tiny_model(true, 6);
    let seeds = tiny_seeds(4, 2);
    let with = generator_grads(&model, &seeds, &[], &[], GeneratorWeights::joint(1.0, 1.0)).unwrap();
    let without = generator_grads(&model, &seeds, &[], &[], GeneratorWeights::joint(1.0, 0.0)).unwrap();
    assert_eq!(with.0.supervised_ce, 0.0);
    assert_eq!(flat(&with.1), flat(&without.1));
}

#[test]
fn joint_update_leaves_critic_head_alone() {
    let model = tiny_model(true, 7);
    let seeds = tiny_seeds(4, 1);
    let real = random_sequences(2, 2, tiny_config().frame_dim, 4);
    let (_, g) = generator_grads(&model, &seeds, &views(&real), &[0, 1], GeneratorWeights::joint(1.0, 1.0)).unwrap();
    assert!(flat(&g.critic_head).iter().all(|&v| v == 0.0));
    assert!(flat(&g.trunk).iter().any(|&v| v != 0.0));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[test]
fn spectral_norm_bounded_after_every_step() {
    let split = small_split(1, 0.5);
    let config = small_config();
    let data = TrainData::new(&split.train).unwrap();
    let mut state = TrainState::new(&config, &data).unwrap();
    for _ in 0..8 {
        state.train_step(&data, &config).unwrap();
        for (i, w) in state.model.critic_path_matrices().iter().enumerate() {
            let s = spectral_norm(w);
            assert!(s <= 1.0 + 1e-3, "step {}: matrix {i} has norm {s}", state.step);
        }
    }
}

#[test]
fn critic_runs_n_critic_times_per_step() {
    let split = small_split(2, 0.5);
    let mut config = small_config();
    config.n_critic = 3;
    config.max_steps = 2;
    let run = train_run(&split, &config, None).unwrap();
    assert!(run.metrics.iter().all(|m| m.critic_updates == 3));
}

#[test]
fn gradient_penalty_mode_logs_penalty() {
    let split = small_split(2, 0.5);
    let mut config = small_config();
    config.lipschitz_mode = LipschitzMode::GradientPenalty;
    config.max_steps = 2;
    let run = train_run(&split, &config, None).unwrap();
    assert!(run.state.model.spectral.is_none());
    assert!(run.metrics.iter().all(|m| m.gradient_penalty.is_some_and(|p| p >= 0.0)));
}

#[test]
fn checkpoint_round_trip_is_bit_exact_and_resumable() {
    let split = small_split(5, 0.3);
    let mut config = small_config();
    config.max_steps = 3;
    let data = TrainData::new(&split.train).unwrap();
    let run = train_run(&split, &config, None).unwrap();

    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &config, &run.state).unwrap();
    let (cfg2, restored) = read_checkpoint(&mut bytes.as_slice()).unwrap();
    assert_eq!(cfg2, config);
    let mut again = Vec::new();
    write_checkpoint(&mut again, &cfg2, &restored).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(flat(&restored.model), flat(&run.state.model));

    let (mut a, mut b) = (run.state.clone(), restored);
    for _ in 0..2 {
        let ma = a.train_step(&data, &config).unwrap();
        let mb = b.train_step(&data, &config).unwrap();
        assert_eq!(ma.critic_wasserstein, mb.critic_wasserstein);
        assert_eq!(ma.generator_total, mb.generator_total);
    }
    assert_eq!(flat(&a.model), flat(&b.model));
}

#[test]
fn identical_runs_write_identical_logs() {
    let split = small_split(8, 0.5);
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str| {
        let out = dir.path().join(name);
        train_run(&split, &config, Some(&out)).unwrap();
        // Wall-clock time is the only column allowed to differ.
        std::fs::read_to_string(out.join("metrics.csv"))
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(1);
                f.join(",")
            })
            .collect::<Vec<_>>()
    };
    let (a, b) = (csv("a"), csv("b"));
    assert_eq!(a.len(), 11);
    assert_eq!(a, b);
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_padding_is_exactly_zero(seed in any::<u64>()) {
        let config = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = InfoGan::new(config.model, true, &mut rng);
        let s = config.seed_prior().sample(&mut rng);
        let g = model.generate(&s);
        prop_assert_eq!(g.frames.nrows(), config.model.max_len);
        prop_assert!(g.frames.slice(s![g.length.., ..]).iter().all(|&v| v == 0.0));
        prop_assert!(g.frames.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn masked_padding_never_changes_trunk(seed in any::<u64>(), len in 1usize..12, pad in 1usize..8, fill in -2.0f64..2.0) {
        let config = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = InfoGan::new(config.model, true, &mut rng);
        let x = random_sequences(1, len, config.model.frame_dim, seed).remove(0);
        let mut padded = Array2::from_elem((len + pad, config.model.frame_dim), fill);
        padded.slice_mut(s![..len, ..]).assign(&x);
        let scales = model.critic().scales;
        let a = trunk_forward(x.view(), len, &model.trunk, &scales);
        let b = trunk_forward(padded.view(), len, &model.trunk, &scales);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn label_masking_quota(seed in any::<u64>(), fraction in 0.05f64..=1.0) {
        let split = SynthSpec::new(4, 90, 8, 1).with_length(LengthPrior::desk()).build();
        let n = split.train.len() as f64;
        let masked = mask_labels(split.clone(), fraction, seed).unwrap();
        let k = masked.labeled_count() as f64;
        prop_assert!(k >= (fraction * n).floor() - 4.0 && k <= (fraction * n).ceil() + 4.0);
        for c in 0..4 {
            let total = split.train.iter().filter(|s| s.label == Some(c)).count() as f64;
            let got = masked.train.iter().filter(|s| s.label == Some(c) && s.labeled).count() as f64;
            prop_assert!((got - fraction * total).abs() <= 1.0, "class {} has {} of {}", c, got, total);
        }
    }

    #[test]
    fn length_prior_bounds(seed in any::<u64>()) {
        let prior = LengthPrior::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..64 {
            let l = prior.sample(&mut rng);
            prop_assert!((prior.offset..=prior.cap).contains(&l));
        }
        let seed_prior = SeedPrior::default();
        let s = seed_prior.sample(&mut rng);
        prop_assert_eq!(s.one_hot().iter().sum::<f64>(), 1.0);
        prop_assert!(s.noise.iter().all(|v| (0.0..1.0).contains(v)));
    }
}

#[test]
fn cross_subject_split_is_disjoint_and_complete() {
    let split = SynthSpec::new(3, 30, 30, 2).with_length(LengthPrior::desk()).build();
    let all: Vec<SkeletonSequence> = split.train.iter().chain(&split.test).cloned().collect();
    let protocol = skelgan::data::CrossSubjectProtocol::new((1..=5).collect(), (6..=10).collect()).unwrap();
    let again = split_cross_subject(all.clone(), &protocol).unwrap();
    assert_eq!(again.train.len() + again.test.len(), all.len());
    assert!(again.train.iter().all(|s| s.subject_id <= 5));
    assert!(again.test.iter().all(|s| s.subject_id > 5));
    for s in all.iter() {
        assert!(s.frames.slice(s![.., 0, ..]).iter().all(|&v| v == 0.0));
    }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

#[test]
fn cnn_matches_encoder_capacity() {
    let config = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = InfoGan::new(config.model, true, &mut rng);
    let cnn = CnnClassifier::new(&config.model, 0.1, &mut rng);
    assert_eq!(cnn.num_params(), model.trunk.num_params() + model.encoder_head.num_params());
}

#[test]
fn baselines_ignore_unlabeled_samples() {
    let split = small_split(4, 0.3);
    let mut scrambled = split.train.clone();
    for s in scrambled.iter_mut().filter(|s| !s.labeled) {
        s.frames.mapv_inplace(|v| -v * 0.5);
        s.label = Some((s.label.unwrap() + 1) % 3);
    }
    let config = small_config();
    let (a, _) = train_cnn(&split.train, &config).unwrap();
    let (b, _) = train_cnn(&scrambled, &config).unwrap();
    assert_eq!(flat(&a), flat(&b));
    let (a, _) = train_rnn(&split.train, &config).unwrap();
    let (b, _) = train_rnn(&scrambled, &config).unwrap();
    assert_eq!(flat(&a), flat(&b));
}

#[test]
fn baseline_training_deterministic_and_eval_without_dropout() {
    let split = small_split(6, 0.5);
    let config = small_config();
    let (a, la) = train_cnn(&split.train, &config).unwrap();
    let (b, lb) = train_cnn(&split.train, &config).unwrap();
    assert_eq!(la, lb);
    assert_eq!(flat(&a), flat(&b));
    let x = split.test[0].to_matrix();
    assert_eq!(a.logits(x.view()), a.logits(x.view()));
}

#[test]
fn rnn_reads_only_true_frames() {
    let split = small_split(6, 1.0);
    let config = small_config();
    let (rnn, _) = train_rnn(&split.train, &config).unwrap();
    let x = split.test[0].to_matrix();
    let mut longer = Array2::zeros((x.nrows() + 5, x.ncols()));
    longer.slice_mut(s![..x.nrows(), ..]).assign(&x);
    let a = rnn.logits(x.view());
    assert_eq!(a, rnn.logits(longer.slice(s![..x.nrows(), ..])));
    assert!(a.iter().all(|v| v.is_finite()));
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

#[test]
fn sequence_export_deterministic_and_masked() {
    let config = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model_cfg = config.model;
    model_cfg.frame_dim = 75;
    let model = InfoGan::new(model_cfg, true, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let prior = config.seed_prior();
    let records = export_sequences(&model, &prior, 3, 9, &a).unwrap();
    export_sequences(&model, &prior, 3, 9, &b).unwrap();
    let text = std::fs::read_to_string(a.join("sequences.jsonl")).unwrap();
    assert_eq!(text, std::fs::read_to_string(b.join("sequences.jsonl")).unwrap());
    let parsed: Vec<SequenceRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, records);
    assert_eq!(parsed.len(), 3);
    for r in &parsed {
        assert_eq!(r.frames.len(), model_cfg.max_len);
        assert!(r.frames[r.length..].iter().flatten().all(|&v| v == 0.0));
        assert!(r.frames.iter().flatten().all(|v| v.abs() < 1.0));
        let svg = a.join(format!("sequence_{:04}_c{}.svg", r.index, r.category));
        assert_eq!(std::fs::read(&svg).unwrap(), std::fs::read(b.join(svg.file_name().unwrap())).unwrap());
    }
}
