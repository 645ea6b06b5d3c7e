//! Experiment configuration files.
//!
//! A config holds one shared simulator configuration (`base`) and a list
//! of scenarios, each a partial override of `base`. Every scenario is run on
//! the same generated workloads and seeds so results are paired.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vodsim_core::workload::{generate_workload, load_trace};
use vodsim_core::{GeneratorParams, SimConfig, VmTypeCatalog, Workload};

use crate::error::CliError;

pub const DEFAULT_REPLICATIONS: usize = 30;

pub fn default_sweep() -> Vec<usize> {
    (1..=10).map(|i| i * 100).collect()
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSource {
    /// Synthetic workload; `num_requests` is replaced by each sweep point.
    Generator(GeneratorParams),
    /// Fixed trace file. The sweep is ignored and a single point labelled
    /// with the trace's stream count is run.
    Trace { path: PathBuf },
}

impl Default for WorkloadSource {
    fn default() -> Self {
        WorkloadSource::Generator(GeneratorParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Restrict the cluster to these catalog types (homogeneous runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<String>>,
    /// Keys of the simulator configuration that differ from `base`.
    #[serde(flatten)]
    pub overrides: toml::Table,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Scenario {
            name: name.into(),
            types: None,
            overrides: toml::Table::new(),
        }
    }

    pub fn set(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        insert_path(&mut self.overrides, key, value.into());
        self
    }

    pub fn restrict(mut self, types: &[&str]) -> Self {
        self.types = Some(types.iter().map(|t| t.to_string()).collect());
        self
    }
}

/// Insert `value` at a dotted `key`, creating intermediate tables.
fn insert_path(table: &mut toml::Table, key: &str, value: toml::Value) {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let toml::Value::Table(t) = entry {
                insert_path(t, rest, value);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Replication `i` uses seed `seed + i` for both the workload and the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sweep")]
    pub sweep: Vec<usize>,
    #[serde(default)]
    pub workload: WorkloadSource,
    #[serde(default = "VmTypeCatalog::ec2_default")]
    pub catalog: VmTypeCatalog,
    #[serde(default)]
    pub base: SimConfig,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

/// A scenario with its overrides applied and its catalog resolved.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub catalog: VmTypeCatalog,
    pub config: SimConfig,
}

fn merge(base: &mut toml::Table, overrides: &toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(k), v) {
            // tagged values (the provisioning mode) are replaced whole
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentConfig {
            name: name.into(),
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            sweep: default_sweep(),
            workload: WorkloadSource::default(),
            catalog: VmTypeCatalog::ec2_default(),
            base: SimConfig::default(),
            scenarios: Vec::new(),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Read a config file. A relative trace path is taken relative to the
    /// directory holding the config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        if let WorkloadSource::Trace { path: trace } = &mut cfg.workload {
            if trace.is_relative() {
                if let Some(dir) = path.parent() {
                    *trace = dir.join(&*trace);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Encode(e.to_string()))
    }

    /// Apply overrides to `base` for every scenario. A config without
    /// scenarios runs `base` alone under the name `default`.
    pub fn resolve(&self) -> Result<Vec<ResolvedScenario>, CliError> {
        let scenarios = if self.scenarios.is_empty() {
            vec![Scenario::new("default")]
        } else {
            self.scenarios.clone()
        };
        let base = toml::Table::try_from(&self.base).map_err(|e| CliError::Encode(e.to_string()))?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(scenarios.len());
        for s in scenarios {
            if !valid_name(&s.name) {
                return Err(CliError::Config(format!(
                    "scenario name `{}` may only use letters, digits, `_`, `-` and `.`",
                    s.name
                )));
            }
            if !seen.insert(s.name.clone()) {
                return Err(CliError::Config(format!("duplicate scenario `{}`", s.name)));
            }
            let mut table = base.clone();
            merge(&mut table, &s.overrides);
            let config: SimConfig = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("scenario `{}`: {}", s.name, e.message())))?;
            let catalog = match &s.types {
                Some(types) => self.catalog.subset(types)?,
                None => self.catalog.clone(),
            };
            config
                .validate(&catalog)
                .map_err(|e| CliError::Config(format!("scenario `{}`: {e}", s.name)))?;
            out.push(ResolvedScenario {
                name: s.name,
                catalog,
                config,
            });
        }
        Ok(out)
    }

    /// Check everything that can be checked without running: counts,
    /// scenario overrides, and the workload source.
    pub fn validate(&self) -> Result<Vec<ResolvedScenario>, CliError> {
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(CliError::Config("sweep must list at least one request count".into()));
        }
        if self.sweep.contains(&0) {
            return Err(CliError::Config("sweep points must be positive".into()));
        }
        if !valid_name(&self.name) {
            return Err(CliError::Config(format!("experiment name `{}` is not a plain identifier", self.name)));
        }
        let scenarios = self.resolve()?;
        match &self.workload {
            WorkloadSource::Generator(params) => {
                params.validate()?;
                let probe = GeneratorParams {
                    num_requests: 1,
                    ..params.clone()
                };
                generate_workload(&probe, &self.catalog, self.seed)?;
            }
            WorkloadSource::Trace { path } => {
                let w = load_trace(path, &self.catalog)?;
                if w.streams.is_empty() {
                    return Err(CliError::Config(format!("trace `{}` holds no streams", path.display())));
                }
            }
        }
        Ok(scenarios)
    }

    /// Sweep points actually run.
    pub fn points(&self) -> Result<Vec<usize>, CliError> {
        match &self.workload {
            WorkloadSource::Generator(_) => Ok(self.sweep.clone()),
            WorkloadSource::Trace { path } => Ok(vec![load_trace(path, &self.catalog)?.streams.len()]),
        }
    }

    /// Workload for one sweep point and replication, on the full catalog.
    pub fn workload_for(&self, num_requests: usize, seed: u64) -> Result<Workload, CliError> {
        match &self.workload {
            WorkloadSource::Generator(params) => {
                let params = GeneratorParams {
                    num_requests,
                    ..params.clone()
                };
                Ok(generate_workload(&params, &self.catalog, seed)?)
            }
            WorkloadSource::Trace { path } => Ok(load_trace(path, &self.catalog)?),
        }
    }
}
