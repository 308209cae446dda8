//! Plots |Wasserstein| curves of two short runs, one per Lipschitz mode,
//! against wall-clock time and step.
//!
//! ```bash
//! cargo run --release --example export_curves -- /tmp/curves
//! ```

use skelgan::data::{mask_labels, SynthSpec};
use skelgan::eval::{export_curves, CurveRun};
use skelgan::training::{train_run, LipschitzMode, TrainConfig};

fn main() -> skelgan::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "curves".into()));
    let split = mask_labels(SynthSpec::desk(7).build(), 0.1, 1)?;

    let mut runs = Vec::new();
    for (name, mode) in [("sn", LipschitzMode::SpectralNorm), ("gp", LipschitzMode::GradientPenalty)] {
        let mut config = TrainConfig::desk(3);
        config.max_steps = 30;
        config.lipschitz_mode = mode;
        let run = train_run(&split, &config, Some(&out.join(name)))?;
        runs.push(CurveRun::from_log(run.metrics_log.expect("output directory given"))?);
    }
    let set = export_curves(&runs, &out)?;
    println!("{}\n{}", set.wall_clock_svg.display(), set.step_svg.display());
    Ok(())
}
