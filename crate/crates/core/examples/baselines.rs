//! Trains the supervised CNN and GRU reference classifiers on labeled
//! sequences only.

use skelgan::baselines::{train_cnn, train_rnn};
use skelgan::data::{mask_labels, SynthSpec};
use skelgan::eval::{evaluate, EvalOptions};
use skelgan::nets::Params;
use skelgan::training::TrainConfig;

fn main() -> skelgan::Result<()> {
    let split = mask_labels(SynthSpec::desk(7).build(), 0.5, 1)?;
    let mut config = TrainConfig::desk(3);
    config.baseline.steps = 150;
    let opts = EvalOptions {
        n_classes: 3,
        label_fraction: split.label_fraction,
        model_tag: String::new(),
        expect_empty: Vec::new(),
    };

    let (cnn, log) = train_cnn(&split.train, &config)?;
    let (report, _) = evaluate(&cnn, &split.test, &opts)?;
    println!(
        "cnn: {} parameters, final loss {:.4}, test accuracy {:.3}",
        cnn.num_params(),
        log.last().map_or(f64::NAN, |m| m.loss),
        report.accuracy
    );

    let (rnn, log) = train_rnn(&split.train, &config)?;
    let (report, _) = evaluate(&rnn, &split.test, &opts)?;
    println!(
        "rnn: {} parameters, final loss {:.4}, test accuracy {:.3}",
        rnn.num_params(),
        log.last().map_or(f64::NAN, |m| m.loss),
        report.accuracy
    );
    Ok(())
}
