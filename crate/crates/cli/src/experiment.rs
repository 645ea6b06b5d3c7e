//! Sweeps, replications and confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vodsim_core::sim::EARLY_GOPS;
use vodsim_core::{run, MetricsReport, Workload};

use crate::config::{ExperimentConfig, ResolvedScenario};
use crate::error::CliError;

/// z value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

pub const STARTUP_DELAY: &str = "startup_delay";
pub const DEADLINE_MISS_RATE: &str = "deadline_miss_rate";
pub const COST: &str = "cost";

/// Metric names in emission order.
pub fn metric_names() -> Vec<String> {
    let mut names: Vec<String> = [STARTUP_DELAY, DEADLINE_MISS_RATE, COST, "peak_vms", "makespan", "resubmissions"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..EARLY_GOPS).map(|j| format!("gop_completion_{j:02}")));
    names
}

/// Metric values of one run, aligned with `metric_names()`. Early-GOP
/// entries are `None` when no stream had that many GOPs.
pub fn metric_values(report: &MetricsReport) -> Vec<Option<f64>> {
    let mut v = vec![
        Some(report.avg_startup_delay),
        Some(report.deadline_miss_rate),
        Some(report.total_cost),
        Some(report.peak_vms as f64),
        Some(report.makespan),
        Some(report.resubmissions as f64),
    ];
    v.extend((0..EARLY_GOPS).map(|j| report.early_gop_completion.get(j).copied().flatten()));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub num_requests: usize,
    pub replication: usize,
    pub seed: u64,
    pub values: Vec<MetricValue>,
}

impl RunRecord {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.values.iter().find(|m| m.metric == metric).map(|m| m.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
}

impl Summary {
    /// Mean and normal-approximation half-width `z * s / sqrt(n)` with the
    /// sample standard deviation `s`. A single value has half-width 0.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * var.sqrt() / (n as f64).sqrt()
        };
        Some(Summary { n, mean, half_width })
    }

    pub fn ci_low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub num_requests: usize,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub points: Vec<PointResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: String,
    pub replications: usize,
    pub seed: u64,
    pub scenarios: Vec<ScenarioResult>,
}

impl SweepResult {
    pub fn summary(&self, scenario: &str, num_requests: usize, metric: &str) -> Option<Summary> {
        self.scenarios
            .iter()
            .find(|s| s.name == scenario)?
            .points
            .iter()
            .find(|p| p.num_requests == num_requests)?
            .metrics
            .iter()
            .find(|m| m.metric == metric)
            .map(|m| m.summary)
    }
}

/// Aggregated results plus every per-run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub result: SweepResult,
    pub runs: Vec<RunRecord>,
}

fn run_cell(
    cfg: &ExperimentConfig,
    scenarios: &[ResolvedScenario],
    workload: &Workload,
    num_requests: usize,
    replication: usize,
) -> Result<Vec<RunRecord>, CliError> {
    let seed = cfg.seed + replication as u64;
    let names = metric_names();
    scenarios
        .iter()
        .map(|s| {
            let projected;
            let w = if s.catalog == cfg.catalog {
                workload
            } else {
                projected = workload.project(&cfg.catalog, &s.catalog)?;
                &projected
            };
            let report = run(w, &s.catalog, &s.config, seed).map_err(|source| CliError::Run {
                scenario: s.name.clone(),
                source,
            })?;
            let values = names
                .iter()
                .zip(metric_values(&report))
                .filter_map(|(m, v)| v.map(|value| MetricValue { metric: m.clone(), value }))
                .collect();
            Ok(RunRecord {
                scenario: s.name.clone(),
                num_requests,
                replication,
                seed,
                values,
            })
        })
        .collect()
}

/// Run every scenario at every sweep point for `replications` seeds.
///
/// Runs are independent and may execute in parallel; records are collected
/// in (point, replication, scenario) order, so results do not depend on
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let scenarios = cfg.validate()?;
    let points = cfg.points()?;
    let trace = match &cfg.workload {
        crate::config::WorkloadSource::Trace { .. } => Some(cfg.workload_for(0, cfg.seed)?),
        _ => None,
    };
    let cells: Vec<(usize, usize)> = points
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let chunks = cells
        .par_iter()
        .map(|&(n, r)| {
            let generated;
            let w = match &trace {
                Some(w) => w,
                None => {
                    generated = cfg.workload_for(n, cfg.seed + r as u64)?;
                    &generated
                }
            };
            run_cell(cfg, &scenarios, w, n, r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let runs: Vec<RunRecord> = chunks.into_iter().flatten().collect();
    let result = aggregate(cfg, &scenarios, &points, &runs);
    Ok(Experiment { result, runs })
}

fn aggregate(cfg: &ExperimentConfig, scenarios: &[ResolvedScenario], points: &[usize], runs: &[RunRecord]) -> SweepResult {
    let names = metric_names();
    let scenarios = scenarios
        .iter()
        .map(|s| ScenarioResult {
            name: s.name.clone(),
            points: points
                .iter()
                .map(|&n| {
                    let cell: Vec<&RunRecord> = runs
                        .iter()
                        .filter(|r| r.scenario == s.name && r.num_requests == n)
                        .collect();
                    let metrics = names
                        .iter()
                        .filter_map(|m| {
                            let vals: Vec<f64> = cell.iter().filter_map(|r| r.get(m)).collect();
                            Summary::of(&vals).map(|summary| MetricSummary {
                                metric: m.clone(),
                                summary,
                            })
                        })
                        .collect();
                    PointResult { num_requests: n, metrics }
                })
                .collect(),
        })
        .collect();
    SweepResult {
        experiment: cfg.name.clone(),
        replications: cfg.replications,
        seed: cfg.seed,
        scenarios,
    }
}
