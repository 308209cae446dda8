//! Training loop driver, metrics log and periodic checkpoints.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::checkpoint::save_checkpoint;
use super::config::TrainConfig;
use super::step::{TrainData, TrainMetrics, TrainState};
use crate::data::DatasetSplit;
use crate::{Error, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "step",
    "wall_clock_s",
    "critic_wasserstein",
    "gen_adversarial",
    "mi_lower_bound",
    "supervised_ce",
    "gradient_penalty",
];

/// One row of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub wall_clock_s: f64,
    pub critic_wasserstein: f64,
    pub gen_adversarial: f64,
    pub mi_lower_bound: f64,
    pub supervised_ce: f64,
    pub gradient_penalty: Option<f64>,
}

impl From<&TrainMetrics> for MetricsRow {
    fn from(m: &TrainMetrics) -> Self {
        Self {
            step: m.step,
            wall_clock_s: m.wall_clock_s,
            critic_wasserstein: m.critic_wasserstein,
            gen_adversarial: m.gen_adversarial,
            mi_lower_bound: m.mi_lower_bound,
            supervised_ce: m.supervised_ce,
            gradient_penalty: m.gradient_penalty,
        }
    }
}

/// Append-only CSV writer for [`MetricsRow`]s.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(METRICS_HEADER).map_err(csv_io)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        let gp = row.gradient_penalty.map(|v| v.to_string()).unwrap_or_default();
        self.inner
            .write_record([
                row.step.to_string(),
                row.wall_clock_s.to_string(),
                row.critic_wasserstein.to_string(),
                row.gen_adversarial.to_string(),
                row.mi_lower_bound.to_string(),
                row.supervised_ce.to_string(),
                gp,
            ])
            .map_err(csv_io)?;
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

/// Parses a metrics log. Malformed rows are reported with their line
/// number.
pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if i == 0 {
            let header: Vec<&str> = record.iter().collect();
            if header != METRICS_HEADER {
                return Err(Error::parse(line, format!("unexpected header {header:?}")));
            }
            continue;
        }
        if record.len() != METRICS_HEADER.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", METRICS_HEADER.len(), record.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|_| Error::parse(line, format!("{}: invalid number {:?}", METRICS_HEADER[k], &record[k])))
        };
        let step = record[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("step: invalid integer {:?}", &record[0])))?;
        rows.push(MetricsRow {
            step,
            wall_clock_s: num(1)?,
            critic_wasserstein: num(2)?,
            gen_adversarial: num(3)?,
            mi_lower_bound: num(4)?,
            supervised_ce: num(5)?,
            gradient_penalty: if record[6].is_empty() { None } else { Some(num(6)?) },
        });
    }
    Ok(rows)
}

pub fn read_metrics_file(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    read_metrics(File::open(path)?)
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: TrainState,
    /// Metrics of every step (not only logged ones).
    pub metrics: Vec<TrainMetrics>,
    /// Final checkpoint, when an output directory was given.
    pub checkpoint: Option<PathBuf>,
    pub metrics_log: Option<PathBuf>,
}

/// Trains from scratch for `config.max_steps` steps.
///
/// With `out_dir`, writes `metrics.csv`, `config.toml`, periodic
/// `checkpoint_<step>.bin` files and a final `checkpoint.bin`. A non-finite
/// failure additionally writes `nonfinite_step_<step>.json`.
pub fn train_run(split: &DatasetSplit, config: &TrainConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let data = TrainData::new(&split.train)?;
    let state = TrainState::new(config, &data)?;
    continue_run(state, &data, config, out_dir)
}

/// Continues `state` until `config.max_steps` steps are complete.
pub fn continue_run(
    mut state: TrainState,
    data: &TrainData,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<RunOutput> {
    let mut log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("config.toml"), config.to_toml_string())?;
            Some(MetricsWriter::new(BufWriter::new(File::create(dir.join("metrics.csv"))?))?)
        }
        None => None,
    };
    let mut metrics = Vec::new();
    while state.step < config.max_steps {
        let m = match state.train_step(data, config) {
            Ok(m) => m,
            Err(e) => {
                if let (Some(dir), Some(dump)) = (out_dir, &state.failure) {
                    let path = dir.join(format!("nonfinite_step_{}.json", dump.step));
                    let json = serde_json::to_string_pretty(dump).expect("dump serializes");
                    std::fs::write(path, json)?;
                }
                return Err(e);
            }
        };
        if let Some(log) = log.as_mut() {
            if m.step % config.log_every == 0 || m.step == config.max_steps {
                log.write(&MetricsRow::from(&m))?;
            }
        }
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && m.step % config.checkpoint_every == 0 && m.step < config.max_steps {
                save_checkpoint(dir.join(format!("checkpoint_{}.bin", m.step)), config, &state)?;
            }
        }
        metrics.push(m);
    }
    let checkpoint = match out_dir {
        Some(dir) => {
            let path = dir.join("checkpoint.bin");
            save_checkpoint(&path, config, &state)?;
            Some(path)
        }
        None => None,
    };
    Ok(RunOutput {
        state,
        metrics,
        checkpoint,
        metrics_log: out_dir.map(|d| d.join("metrics.csv")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![
            MetricsRow {
                step: 1,
                wall_clock_s: 0.25,
                critic_wasserstein: -0.125,
                gen_adversarial: 3.5e-7,
                mi_lower_bound: 0.1,
                supervised_ce: 1.0986122886681098,
                gradient_penalty: None,
            },
            MetricsRow {
                step: 2,
                wall_clock_s: 0.5,
                critic_wasserstein: 1.0 / 3.0,
                gen_adversarial: -2.0,
                mi_lower_bound: 0.0,
                supervised_ce: 0.0,
                gradient_penalty: Some(0.75),
            },
        ];
        let mut buf = Vec::new();
        {
            let mut w = MetricsWriter::new(&mut buf).unwrap();
            for r in &rows {
                w.write(r).unwrap();
            }
        }
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "step,wall_clock_s,critic_wasserstein,gen_adversarial,mi_lower_bound,supervised_ce,gradient_penalty\n"
        ));
        assert_eq!(read_metrics(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{}\n1,0.1,0,0,0,0,\n2,0.2,abc,0,0,0,\n", METRICS_HEADER.join(","));
        match read_metrics(text.as_bytes()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error on line 3, got {other:?}"),
        }
        let short = format!("{}\n1,0.1\n", METRICS_HEADER.join(","));
        assert!(matches!(read_metrics(short.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_metrics("a,b\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
