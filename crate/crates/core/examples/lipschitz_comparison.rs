//! Compares spectral normalization with the gradient penalty on the
//! wall-clock axis: the penalty run fixes the time budget and the |W| level
//! it settles at, the spectral-norm run trains for the same time.
//!
//! ```bash
//! cargo run --release --example lipschitz_comparison -- 200
//! ```

use skelgan::data::{mask_labels, SynthSpec};
use skelgan::eval::{time_to_level, window_median};
use skelgan::training::{train_run, LipschitzMode, MetricsRow, TrainConfig, TrainData, TrainState};

fn main() -> skelgan::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let split = mask_labels(SynthSpec::desk(7).build(), 0.1, 1)?;

    let mut config = TrainConfig::desk(3);
    config.max_steps = steps;
    config.lipschitz_mode = LipschitzMode::GradientPenalty;
    let gp: Vec<MetricsRow> = train_run(&split, &config, None)?.metrics.iter().map(MetricsRow::from).collect();
    let budget = gp.last().unwrap().wall_clock_s;

    config.lipschitz_mode = LipschitzMode::SpectralNorm;
    let data = TrainData::new(&split.train)?;
    let mut state = TrainState::new(&config, &data)?;
    let mut sn = Vec::new();
    while sn.last().map_or(0.0, |r: &MetricsRow| r.wall_clock_s) < budget {
        sn.push(MetricsRow::from(&state.train_step(&data, &config)?));
    }

    let level = window_median(&gp, 0.8, 1.0);
    let show = |t: Option<f64>| t.map_or("never".to_string(), |t| format!("{t:.1}s"));
    println!("budget {budget:.1}s: {} gradient-penalty steps, {} spectral-norm steps", gp.len(), sn.len());
    println!("level {level:.4} (gradient-penalty median |W| over its last 20%)");
    println!("  spectral norm reaches it at {}", show(time_to_level(&sn, level, 9)));
    println!("  gradient penalty reaches it at {}", show(time_to_level(&gp, level, 9)));
    Ok(())
}
