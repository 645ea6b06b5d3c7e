//! Result files.
//!
//! CSV output writes, per scenario, a long-format summary
//! (`<scenario>.summary.csv`) and the raw runs (`<scenario>.runs.csv`).
//! JSON output writes the whole experiment to `results.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::experiment::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub const SUMMARY_HEADER: [&str; 5] = ["num_requests", "metric", "mean", "ci_low", "ci_high"];
const RUNS_HEADER: [&str; 5] = ["num_requests", "replication", "seed", "metric", "value"];

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_csv(path: &Path, header: [&str; 5], rows: impl Iterator<Item = [String; 5]>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(write_err(path))
}

/// Write `experiment` under `out_dir` and return the files written.
pub fn emit(experiment: &Experiment, format: Format, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if experiment.result.scenarios.is_empty() {
        return Err(CliError::Config("nothing to emit".into()));
    }
    fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
    let mut written = Vec::new();
    match format {
        Format::Json => {
            let path = out_dir.join("results.json");
            let mut text = serde_json::to_string_pretty(experiment).map_err(|e| CliError::Encode(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text).map_err(write_err(&path))?;
            written.push(path);
        }
        Format::Csv => {
            for s in &experiment.result.scenarios {
                let path = out_dir.join(format!("{}.summary.csv", s.name));
                let rows = s.points.iter().flat_map(|p| {
                    p.metrics.iter().map(move |m| {
                        [
                            p.num_requests.to_string(),
                            m.metric.clone(),
                            m.summary.mean.to_string(),
                            m.summary.ci_low().to_string(),
                            m.summary.ci_high().to_string(),
                        ]
                    })
                });
                write_csv(&path, SUMMARY_HEADER, rows)?;
                written.push(path);

                let path = out_dir.join(format!("{}.runs.csv", s.name));
                let rows = experiment.runs.iter().filter(|r| r.scenario == s.name).flat_map(|r| {
                    r.values.iter().map(move |v| {
                        [
                            r.num_requests.to_string(),
                            r.replication.to_string(),
                            r.seed.to_string(),
                            v.metric.clone(),
                            v.value.to_string(),
                        ]
                    })
                });
                write_csv(&path, RUNS_HEADER, rows)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
