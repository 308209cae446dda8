//! Generated-sequence export and Wasserstein training curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use plotters::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nets::InfoGan;
use crate::priors::SeedPrior;
use crate::training::{read_metrics_file, MetricsRow};
use crate::{Error, Result};

/// Bones of the 25-joint Kinect v2 skeleton as 0-based joint pairs.
pub const BONES: [(usize, usize); 24] = [
    (0, 1),
    (1, 20),
    (20, 2),
    (2, 3),
    (20, 4),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 21),
    (7, 22),
    (20, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (11, 23),
    (11, 24),
    (0, 12),
    (12, 13),
    (13, 14),
    (14, 15),
    (0, 16),
    (16, 17),
    (17, 18),
    (18, 19),
];

/// One line of `sequences.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub index: usize,
    pub category: usize,
    pub length: usize,
    pub noise: Vec<f64>,
    /// `max_len` rows; rows at and after `length` are zero.
    pub frames: Vec<Vec<f64>>,
}

/// Draws `n` seeds from `prior`, generates them and writes
/// `sequences.jsonl` plus one skeleton SVG per sequence (25-joint frames
/// only). Returns the records.
pub fn export_sequences(
    model: &InfoGan,
    prior: &SeedPrior,
    n: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<SequenceRecord>> {
    if n == 0 {
        return Err(Error::Argument("number of sequences must be positive".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = BufWriter::new(File::create(out_dir.join("sequences.jsonl"))?);
    let mut records = Vec::with_capacity(n);
    for index in 0..n {
        let s = prior.sample(&mut rng);
        let g = model.generate(&s);
        if !g.frames.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                step: 0,
                detail: format!("generated sequence {index} is not finite"),
            });
        }
        let record = SequenceRecord {
            index,
            category: s.category,
            length: g.length,
            noise: s.noise.clone(),
            frames: g.frames.outer_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
        if model.config.frame_dim == 75 {
            let path = out_dir.join(format!("sequence_{index:04}_c{}.svg", s.category));
            draw_skeleton_shadow(g.active(), &path, &format!("sequence {index}, code {}", s.category))?;
        }
        records.push(record);
    }
    w.flush()?;
    Ok(records)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Up to eight evenly spaced frames side by side, x-y projection.
fn draw_skeleton_shadow(active: ArrayView2<f64>, path: &Path, title: &str) -> Result<()> {
    let t = active.nrows();
    let shown: Vec<usize> = if t <= 8 {
        (0..t).collect()
    } else {
        (0..8).map(|i| i * (t - 1) / 7).collect()
    };
    let width = 1.2;
    let root = SVGBackend::new(path, (160 * shown.len().max(1) as u32, 240)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 14))
        .margin(8)
        .build_cartesian_2d(-0.6..(shown.len() as f64 - 0.4) * width, -1.0..1.0)
        .map_err(plot_err)?;
    for (slot, &frame) in shown.iter().enumerate() {
        let row = active.row(frame);
        let joint = |j: usize| (row[3 * j] + slot as f64 * width, row[3 * j + 1]);
        let shade = 0.25 + 0.75 * (slot + 1) as f64 / shown.len() as f64;
        let colour = BLUE.mix(shade);
        for &(a, b) in &BONES {
            chart
                .draw_series(LineSeries::new([joint(a), joint(b)], colour.stroke_width(2)))
                .map_err(plot_err)?;
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// A labeled metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRun {
    pub label: String,
    pub rows: Vec<MetricsRow>,
}

impl CurveRun {
    /// Reads a metrics CSV; the label names the Lipschitz mode, inferred
    /// from whether the penalty column is filled.
    pub fn from_log(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_metrics_file(path)?;
        let gp = rows.iter().any(|r| r.gradient_penalty.is_some());
        let label = if gp { "gradient penalty" } else { "spectral norm" };
        Ok(Self {
            label: label.into(),
            rows,
        })
    }
}

/// Files written by [`export_curves`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub wall_clock_svg: PathBuf,
    pub step_svg: PathBuf,
    /// Points plotted per run, in input order.
    pub points: Vec<usize>,
}

/// Plots `critic_wasserstein` against wall-clock time and against step
/// for every run.
pub fn export_curves(runs: &[CurveRun], out_dir: &Path) -> Result<CurveSet> {
    if runs.is_empty() {
        return Err(Error::Argument("no metrics logs given".into()));
    }
    for r in runs {
        if r.rows.len() < 2 {
            return Err(Error::Argument(format!(
                "run '{}' has {} rows; at least 2 are needed for a curve",
                r.label,
                r.rows.len()
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let wall_clock_svg = out_dir.join("wasserstein_vs_wall_clock.svg");
    let step_svg = out_dir.join("wasserstein_vs_step.svg");
    draw_curves(runs, &wall_clock_svg, "wall clock (s)", |r| r.wall_clock_s)?;
    draw_curves(runs, &step_svg, "step", |r| r.step as f64)?;
    Ok(CurveSet {
        wall_clock_svg,
        step_svg,
        points: runs.iter().map(|r| r.rows.len()).collect(),
    })
}

fn draw_curves(runs: &[CurveRun], path: &Path, x_label: &str, x: impl Fn(&MetricsRow) -> f64) -> Result<()> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for row in runs.iter().flat_map(|r| &r.rows) {
        x0 = x0.min(x(row));
        x1 = x1.max(x(row));
        y0 = y0.min(row.critic_wasserstein);
        y1 = y1.max(row.critic_wasserstein);
    }
    if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::Data("metrics contain non-finite values".into()));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("critic Wasserstein estimate", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("E[D(real)] - E[D(fake)]")
        .draw()
        .map_err(plot_err)?;
    for (i, run) in runs.iter().enumerate() {
        let colour = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(run.rows.iter().map(|r| (x(r), r.critic_wasserstein)), colour.stroke_width(2)))
            .map_err(plot_err)?
            .label(run.label.clone())
            .legend(move |(lx, ly)| PathElement::new([(lx, ly), (lx + 16, ly)], colour.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of `|critic_wasserstein|` over the rows in the fractional range
/// `[from, to)` of the log (at least one row).
pub fn window_median(rows: &[MetricsRow], from: f64, to: f64) -> f64 {
    assert!(!rows.is_empty(), "empty metrics log");
    let n = rows.len();
    let a = ((from * n as f64).floor() as usize).min(n - 1);
    let b = ((to * n as f64).ceil() as usize).clamp(a + 1, n);
    median(rows[a..b].iter().map(|r| r.critic_wasserstein.abs()).collect())
}

/// Trailing running median of `|critic_wasserstein|`.
pub fn smoothed_abs_wasserstein(rows: &[MetricsRow], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..rows.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            median(rows[lo..=i].iter().map(|r| r.critic_wasserstein.abs()).collect())
        })
        .collect()
}

/// Wall-clock time at which the smoothed `|W|` first falls to `level` after
/// its peak, or `None` if it never does.
pub fn time_to_level(rows: &[MetricsRow], level: f64, window: usize) -> Option<f64> {
    let smooth = smoothed_abs_wasserstein(rows, window);
    let peak = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)?;
    (peak..rows.len())
        .find(|&i| smooth[i] <= level)
        .map(|i| rows[i].wall_clock_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, w: f64, gp: Option<f64>) -> MetricsRow {
        MetricsRow {
            step,
            wall_clock_s: step as f64 * 0.5,
            critic_wasserstein: w,
            gen_adversarial: 0.0,
            mi_lower_bound: 0.0,
            supervised_ce: 0.0,
            gradient_penalty: gp,
        }
    }

    #[test]
    fn bones_form_a_tree() {
        let mut seen = [false; 25];
        seen[0] = true;
        for &(a, b) in &BONES {
            assert!(seen[a], "bone ({a},{b}) starts at an unreached joint");
            assert!(!seen[b]);
            seen[b] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn curves_written() {
        let dir = tempfile::tempdir().unwrap();
        let runs = [
            CurveRun {
                label: "sn".into(),
                rows: (1..=5).map(|s| row(s, 1.0 / s as f64, None)).collect(),
            },
            CurveRun {
                label: "gp".into(),
                rows: (1..=3).map(|s| row(s, 2.0 / s as f64, Some(0.1))).collect(),
            },
        ];
        let set = export_curves(&runs, dir.path()).unwrap();
        assert_eq!(set.points, vec![5, 3]);
        let svg = std::fs::read_to_string(&set.wall_clock_svg).unwrap();
        assert!(svg.contains("<svg"));
        assert!(set.step_svg.exists());
    }

    #[test]
    fn level_crossing_after_peak() {
        let ws = [0.5, 2.0, 3.0, 2.5, 1.5, 1.0, 0.8];
        let rows: Vec<_> = ws.iter().enumerate().map(|(i, &w)| row(i as u64 + 1, w, None)).collect();
        assert_eq!(time_to_level(&rows, 1.0, 1), Some(3.0));
        assert_eq!(time_to_level(&rows, 0.1, 1), None);
        assert_eq!(window_median(&rows, 0.0, 0.2), 1.25);
        assert_eq!(smoothed_abs_wasserstein(&rows, 3)[2], 2.0);
    }

    #[test]
    fn single_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let runs = [CurveRun {
            label: "x".into(),
            rows: vec![row(1, 1.0, None)],
        }];
        assert!(matches!(export_curves(&runs, dir.path()), Err(Error::Argument(_))));
    }
}
