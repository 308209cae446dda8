//! Trains the semi-supervised InfoGAN on the synthetic fixture and reports
//! encoder accuracy on the held-out subjects.
//!
//! ```bash
//! cargo run --release --example train_fixture -- 200 /tmp/run
//! ```

use skelgan::data::{mask_labels, SynthSpec};
use skelgan::eval::{evaluate, EvalOptions};
use skelgan::nets::SPECTRAL_WARMUP_ITERS;
use skelgan::training::{train_run, TrainConfig};

fn main() -> skelgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let out = args.next();

    let split = mask_labels(SynthSpec::desk(7).build(), 0.1, 1)?;
    let mut config = TrainConfig::desk(3);
    config.max_steps = steps;
    config.log_every = (steps / 10).max(1);

    let run = train_run(&split, &config, out.as_ref().map(std::path::Path::new))?;
    for m in run.metrics.iter().step_by(config.log_every as usize) {
        println!(
            "step {:>4}  W {:>8.4}  adv {:>8.4}  mi {:>7.4}  ce {:>7.4}",
            m.step, m.critic_wasserstein, m.gen_adversarial, m.mi_lower_bound, m.supervised_ce
        );
    }

    let mut model = run.state.model.clone();
    model.converge_spectral(SPECTRAL_WARMUP_ITERS);
    let opts = EvalOptions {
        n_classes: 3,
        label_fraction: split.label_fraction,
        model_tag: "infogan".into(),
        expect_empty: Vec::new(),
    };
    let (report, _) = evaluate(&model.encoder(), &split.test, &opts)?;
    println!("encoder test accuracy with 10% labels: {:.3}", report.accuracy);
    if let Some(ckpt) = run.checkpoint {
        println!("checkpoint: {}", ckpt.display());
    }
    Ok(())
}
