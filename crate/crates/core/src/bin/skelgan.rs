use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skelgan::baselines::{train_cnn, train_rnn, Classifier, CnnClassifier, RnnClassifier};
use skelgan::data::preprocess::default_multi_subject_classes;
use skelgan::data::{
    build_split, mask_labels, read_dataset, read_ntu_dir, write_dataset, BodyPolicy, CrossSubjectProtocol,
    DatasetSplit, FilterConfig, SynthSpec, N_ACTION_CLASSES,
};
use skelgan::eval::{
    evaluate, export_curves, export_sequences, map_code_to_class, CodeMapping, CurveRun, EvalOptions, Remapped,
};
use skelgan::priors::LengthPrior;
use skelgan::training::{
    checkpoint_config, checkpoint_kind, load_checkpoint, load_classifier_into, save_classifier, train_run,
    CheckpointKind, LipschitzMode, TrainConfig,
};
use skelgan::{Error, Result};

#[derive(Parser)]
#[command(name = "skelgan", version, about = "Semi-supervised Wasserstein InfoGAN for skeleton sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset file from NTU .skeleton files or the synthetic fixture.
    Prepare(PrepareArgs),
    /// Train the InfoGAN.
    Train(TrainArgs),
    /// Train a supervised CNN or RNN baseline.
    Baseline(BaselineArgs),
    /// Accuracy and confusion matrix on the test split.
    Evaluate(EvaluateArgs),
    /// Sample sequences from a trained generator.
    Generate(GenerateArgs),
    /// Plot Wasserstein-estimate curves from metrics logs.
    Curves(CurvesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    CrossSubject,
}

#[derive(Clone, Copy, ValueEnum)]
enum BodyPolicyArg {
    Drop,
    KeepLongest,
}

#[derive(clap::Args)]
struct PrepareArgs {
    /// Directory of .skeleton files.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generate the synthetic fixture instead of reading NTU files.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    output: PathBuf,
    /// Remove multi-subject classes and multi-body recordings.
    #[arg(long)]
    filter_single_subject: bool,
    /// Treat the last ten classes as the multi-subject ones.
    #[arg(long)]
    last_ten_classes: bool,
    #[arg(long, value_enum, default_value = "drop")]
    body_policy: BodyPolicyArg,
    #[arg(long, value_enum, default_value = "cross-subject")]
    split: SplitArg,
    #[arg(long, default_value_t = 1.0)]
    label_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic fixture: number of classes.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Synthetic fixture: training sequences.
    #[arg(long, default_value_t = 2000)]
    n_train: usize,
    /// Synthetic fixture: test sequences.
    #[arg(long, default_value_t = 600)]
    n_test: usize,
    /// Synthetic fixture: short 10 to 30 frame sequences.
    #[arg(long)]
    desk: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LipschitzArg {
    Spectral,
    Gp,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML training config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    lipschitz: Option<LipschitzArg>,
    /// Re-mask the training labels to this fraction.
    #[arg(long)]
    label_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override `max_steps`.
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Cnn,
    Rnn,
}

#[derive(clap::Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    model: BaselineArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label_fraction: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override `baseline.steps`.
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Infogan,
    Cnn,
    Rnn,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write `report.json` and `confusion.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(short = 'n', default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CurvesArgs {
    /// One or two metrics CSVs, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => train(a),
        Command::Baseline(a) => baseline(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Curves(a) => curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn prepare(a: PrepareArgs) -> Result<()> {
    let split = if a.synthetic {
        let spec = SynthSpec::new(a.classes, a.n_train, a.n_test, a.seed);
        if a.desk {
            spec.with_length(LengthPrior::desk()).build()
        } else {
            spec.build()
        }
    } else {
        let dir = a.input.expect("clap enforces --input");
        let recordings = read_ntu_dir(&dir)?;
        let mut filter = if a.last_ten_classes {
            FilterConfig::last_ten_classes()
        } else {
            FilterConfig::default()
        };
        filter.body_policy = match a.body_policy {
            BodyPolicyArg::Drop => BodyPolicy::DropMultiBody,
            BodyPolicyArg::KeepLongest => BodyPolicy::KeepLongestBody,
        };
        let protocol = match a.split {
            SplitArg::CrossSubject => CrossSubjectProtocol::ntu(),
        };
        let (split, stats) = build_split(recordings, a.filter_single_subject.then_some(&filter), &protocol)?;
        eprintln!(
            "read {} recordings, filtered {}, skipped {} without tracked frames",
            stats.recordings, stats.filtered_out, stats.empty
        );
        split
    };
    let split = mask_labels(split, a.label_fraction, a.seed)?;
    write_dataset(&a.output, &split)?;
    println!(
        "{}: {} train ({} labeled), {} test",
        a.output.display(),
        split.train.len(),
        split.labeled_count(),
        split.test.len()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn load_split(path: &Path, label_fraction: Option<f64>, seed: u64) -> Result<DatasetSplit> {
    let split = read_dataset(path)?;
    match label_fraction {
        Some(f) => mask_labels(split, f, seed),
        None => Ok(split),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(steps) = a.steps {
        config.max_steps = steps;
    }
    if let Some(mode) = a.lipschitz {
        config.lipschitz_mode = match mode {
            LipschitzArg::Spectral => LipschitzMode::SpectralNorm,
            LipschitzArg::Gp => LipschitzMode::GradientPenalty,
        };
    }
    config.validate()?;
    let split = load_split(&a.data, a.label_fraction, config.seed)?;
    let run = train_run(&split, &config, Some(&a.out))?;
    if let Some(last) = run.metrics.last() {
        println!(
            "step {} in {:.1}s: wasserstein {:.4}, mi {:.4}, ce {:.4}",
            last.step, last.wall_clock_s, last.critic_wasserstein, last.mi_lower_bound, last.supervised_ce
        );
    }
    if let Some(p) = run.checkpoint {
        println!("checkpoint: {}", p.display());
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(steps) = a.steps {
        config.baseline.steps = steps;
    }
    config.validate()?;
    let split = load_split(&a.data, a.label_fraction, config.seed)?;
    std::fs::create_dir_all(&a.out)?;
    let path = a.out.join("checkpoint.bin");
    let metrics = match a.model {
        BaselineArg::Cnn => {
            let (m, metrics) = train_cnn(&split.train, &config)?;
            save_classifier(&path, &config, CheckpointKind::Cnn, &m)?;
            metrics
        }
        BaselineArg::Rnn => {
            let (m, metrics) = train_rnn(&split.train, &config)?;
            save_classifier(&path, &config, CheckpointKind::Rnn, &m)?;
            metrics
        }
    };
    let mut w = csv::Writer::from_path(a.out.join("baseline_metrics.csv")).map_err(csv_err)?;
    for m in &metrics {
        w.serialize(m).map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(last) = metrics.last() {
        println!("step {}: training cross-entropy {:.4}", last.step, last.loss);
    }
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let kind = checkpoint_kind(&a.checkpoint)?;
    let expected = match a.model {
        ModelArg::Infogan => CheckpointKind::InfoGan,
        ModelArg::Cnn => CheckpointKind::Cnn,
        ModelArg::Rnn => CheckpointKind::Rnn,
    };
    if kind != expected {
        return Err(Error::Argument(format!(
            "{} holds a {} model, not {}",
            a.checkpoint.display(),
            kind.as_str(),
            expected.as_str()
        )));
    }
    let config = checkpoint_config(&a.checkpoint)?;
    let split = read_dataset(&a.data)?;
    let n_classes = config.model.n_categories;
    let opts = EvalOptions {
        n_classes,
        label_fraction: split.label_fraction,
        model_tag: kind.as_str().into(),
        expect_empty: if n_classes == N_ACTION_CLASSES {
            default_multi_subject_classes().into_iter().collect()
        } else {
            Vec::new()
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (report, cm) = match a.model {
        ModelArg::Infogan => {
            let (_, mut state) = load_checkpoint(&a.checkpoint)?;
            state.model.converge_spectral(skelgan::nets::SPECTRAL_WARMUP_ITERS);
            let encoder = state.model.encoder();
            let mapping = if config.lambda_sup > 0.0 {
                CodeMapping::identity(n_classes)
            } else {
                let labeled: Vec<_> = split.train.iter().filter(|s| s.supervised_label().is_some()).collect();
                let codes: Vec<usize> = labeled.iter().map(|s| encoder.classify(s.to_matrix().view()).0).collect();
                let labels: Vec<usize> = labeled.iter().filter_map(|s| s.supervised_label()).collect();
                let m = map_code_to_class(&codes, &labels, n_classes)?;
                if m.degenerate {
                    eprintln!("warning: encoder maps every labeled sample to one code; using identity");
                }
                m
            };
            let remapped = Remapped {
                inner: &encoder,
                mapping: &mapping,
            };
            evaluate(&remapped, &split.test, &opts)?
        }
        ModelArg::Cnn => {
            let mut m = CnnClassifier::new(&config.model, config.baseline.dropout, &mut rng);
            load_classifier_into(&a.checkpoint, kind, &mut m)?;
            evaluate(&m, &split.test, &opts)?
        }
        ModelArg::Rnn => {
            let mut m = RnnClassifier::new(&config.model, config.baseline.rnn_hidden, &mut rng);
            load_classifier_into(&a.checkpoint, kind, &mut m)?;
            evaluate(&m, &split.test, &opts)?
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.into()))?;
    println!("{json}");
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("report.json"), &json)?;
        std::fs::write(out.join("confusion.csv"), cm.to_csv())?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    if checkpoint_kind(&a.checkpoint)? != CheckpointKind::InfoGan {
        return Err(Error::Argument("generation needs an InfoGAN checkpoint".into()));
    }
    let (config, state) = load_checkpoint(&a.checkpoint)?;
    let records = export_sequences(&state.model, &config.seed_prior(), a.n, a.seed, &a.out)?;
    println!("wrote {} sequences to {}", records.len(), a.out.display());
    Ok(())
}

fn curves(a: CurvesArgs) -> Result<()> {
    if a.logs.len() > 2 {
        return Err(Error::Argument(format!("at most two logs can be overlaid, got {}", a.logs.len())));
    }
    let runs = a.logs.iter().map(CurveRun::from_log).collect::<Result<Vec<_>>>()?;
    let set = export_curves(&runs, &a.out)?;
    println!("{}\n{}", set.wall_clock_svg.display(), set.step_svg.display());
    Ok(())
}
