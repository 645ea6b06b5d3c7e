//! Discrete-event simulation of the transcoding service.
//!
//! One run replays a workload against a cluster: streams arrive, their GOPs
//! are mapped by a heuristic onto VM local queues, execution times are drawn
//! when a GOP starts, the merger reorders output and requests resubmission
//! of overdue GOPs, and (in dynamic mode) the provisioner grows and shrinks
//! the cluster. Cost accrues per started charging cycle.

mod engine;
mod event;
mod merger;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmissionError, UtilityParams};
use crate::provisioner::{DeallocationDecision, ProvisionerError, ProvisionerParams, QosBand, VmSnapshot};
use crate::scheduler::{HeuristicKind, HeuristicRegistry, MappingHeuristic};
use crate::workload::{GopId, VmTypeCatalog, Workload, WorkloadError};

pub use event::{Event, EventKind, EventQueue};
pub use merger::OutputWindow;

/// Early GOP indices whose completion time is averaged in the report.
pub const EARLY_GOPS: usize = 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Admission(#[from] AdmissionError),
    #[error(transparent)]
    Provisioner(#[from] ProvisionerError),
    #[error("simulation stalled at t={time:.1}s with {pending} GOPs undelivered")]
    Stalled { time: f64, pending: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProvisioningMode {
    /// Fixed cluster, VM counts by type id.
    Static { counts: BTreeMap<String, usize> },
    /// Elastic cluster starting from `initial`.
    Dynamic { initial: BTreeMap<String, usize> },
}

impl ProvisioningMode {
    pub fn static_of(type_id: &str, count: usize) -> Self {
        ProvisioningMode::Static {
            counts: BTreeMap::from([(type_id.to_string(), count)]),
        }
    }

    pub fn dynamic_from(type_id: &str, count: usize) -> Self {
        ProvisioningMode::Dynamic {
            initial: BTreeMap::from([(type_id.to_string(), count)]),
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, ProvisioningMode::Dynamic { .. })
    }

    fn counts(&self) -> &BTreeMap<String, usize> {
        match self {
            ProvisioningMode::Static { counts } => counts,
            ProvisioningMode::Dynamic { initial } => initial,
        }
    }
}

impl Default for ProvisioningMode {
    fn default() -> Self {
        ProvisioningMode::dynamic_from("c4.xlarge", 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub heuristic: HeuristicKind,
    pub mode: ProvisioningMode,
    pub qos: QosBand,
    pub provisioner: ProvisionerParams,
    pub utility: UtilityParams,
    pub cycle_seconds: f64,
    /// Provisional playback start after arrival, used for deadlines of
    /// streams whose first GOP is not delivered yet.
    pub startup_allowance: f64,
    /// Merger waits this multiple of the GOP's mean execution time past its
    /// deadline (or its estimated completion, if later) before resubmitting.
    pub merger_grace_factor: f64,
    /// Probability that an execution is lost and must be resubmitted.
    pub failure_probability: f64,
    /// Keep the merger release order in the report.
    pub record_releases: bool,
    /// Keep every deallocation decision with its inputs.
    pub audit_deallocation: bool,
    /// Replace the measured miss rate fed to the provisioner.
    pub gamma_override: Option<f64>,
    /// Abort if simulated time passes this bound.
    pub max_sim_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            heuristic: HeuristicKind::MMUT,
            mode: ProvisioningMode::default(),
            qos: QosBand::default(),
            provisioner: ProvisionerParams::default(),
            utility: UtilityParams::default(),
            cycle_seconds: 3600.0,
            startup_allowance: 5.0,
            merger_grace_factor: 3.0,
            failure_probability: 0.0,
            record_releases: false,
            audit_deallocation: false,
            gamma_override: None,
            max_sim_time: 1e7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, catalog: &VmTypeCatalog) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        self.qos.validate()?;
        self.provisioner.validate()?;
        if !(self.utility.c > 0.0) {
            return err("utility slope c must be positive".into());
        }
        if !(self.cycle_seconds > 0.0) {
            return err("cycle_seconds must be positive".into());
        }
        if !(self.startup_allowance >= 0.0) || !(self.merger_grace_factor >= 0.0) {
            return err("startup_allowance and merger_grace_factor must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.failure_probability) {
            return err("failure_probability must lie in [0, 1)".into());
        }
        for t in self.mode.counts().keys() {
            if catalog.position(t).is_none() {
                return err(format!("unknown VM type `{t}` in provisioning mode"));
            }
        }
        let total: usize = self.mode.counts().values().sum();
        let remedial = self.provisioner.remedial;
        match &self.mode {
            ProvisioningMode::Static { .. } if total == 0 => err("static mode needs at least one VM".into()),
            ProvisioningMode::Dynamic { .. } if total == 0 && !remedial => {
                err("dynamic mode without remedial provisioning needs at least one initial VM".into())
            }
            ProvisioningMode::Dynamic { .. } if self.provisioner.min_vms == 0 && !remedial => {
                err("min_vms must be at least 1 when remedial provisioning is off".into())
            }
            ProvisioningMode::Dynamic { .. }
                if remedial && catalog.position(&self.provisioner.remedial_type).is_none() =>
            {
                err(format!(
                    "remedial type `{}` is not in the catalog",
                    self.provisioner.remedial_type
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Why a VM was allocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationCause {
    Initial,
    Periodic,
    Remedial,
}

/// What triggered a deallocation decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeallocTrigger {
    Tick,
    CycleBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ProvisioningRecord {
    Tick { time: f64, gamma: f64 },
    Allocate { time: f64, vm_id: usize, type_id: String, cause: AllocationCause },
    Mark { time: f64, vm_id: usize, utilization: f64, eta: f64, trigger: DeallocTrigger },
    Retain { time: f64, vm_id: usize, eta: f64, trigger: DeallocTrigger },
    Charge { time: f64, vm_id: usize, cycle: u32 },
    Terminate { time: f64, vm_id: usize },
}

impl ProvisioningRecord {
    pub fn time(&self) -> f64 {
        match self {
            ProvisioningRecord::Tick { time, .. }
            | ProvisioningRecord::Allocate { time, .. }
            | ProvisioningRecord::Mark { time, .. }
            | ProvisioningRecord::Retain { time, .. }
            | ProvisioningRecord::Charge { time, .. }
            | ProvisioningRecord::Terminate { time, .. } => *time,
        }
    }
}

/// Inputs and outcome of one deallocation decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DeallocAudit {
    pub time: f64,
    pub trigger: DeallocTrigger,
    pub gamma: f64,
    pub snapshots: Vec<VmSnapshot>,
    pub decision: DeallocationDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmBill {
    pub vm_id: usize,
    pub type_id: String,
    pub hourly_cost: f64,
    pub allocated_at: f64,
    pub released_at: Option<f64>,
    pub cycles_paid: u32,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_streams: usize,
    pub total_gops: usize,
    pub delivered_gops: usize,
    /// Per stream in workload order; `None` for streams without GOPs.
    pub startup_delays: Vec<Option<f64>>,
    pub avg_startup_delay: f64,
    /// Completions checked against a deadline (every GOP but the first of a stream).
    pub deadline_checked: usize,
    pub deadline_misses: usize,
    pub deadline_miss_rate: f64,
    /// Mean completion time after request arrival for GOP indices `0..EARLY_GOPS`.
    pub early_gop_completion: Vec<Option<f64>>,
    pub total_cost: f64,
    /// Time of the last delivery.
    pub makespan: f64,
    pub resubmissions: usize,
    pub duplicate_deliveries: usize,
    pub failed_executions: usize,
    pub peak_vms: usize,
    pub vm_bills: Vec<VmBill>,
    pub timeline: Vec<ProvisioningRecord>,
    /// Merger output order; empty unless requested.
    pub releases: Vec<GopId>,
    pub events_processed: u64,
    #[serde(skip)]
    pub dealloc_audit: Vec<DeallocAudit>,
}

impl MetricsReport {
    /// Sum of cycles paid times hourly price over all instances.
    pub fn billed_cost(&self) -> f64 {
        self.vm_bills.iter().map(|b| b.cycles_paid as f64 * b.hourly_cost).sum()
    }
}

/// Run one simulation with a built-in heuristic.
pub fn run(
    workload: &Workload,
    catalog: &VmTypeCatalog,
    config: &SimConfig,
    seed: u64,
) -> Result<MetricsReport, SimError> {
    let heuristic = HeuristicRegistry::with_builtins()
        .get(config.heuristic.as_str())
        .map_err(|e| SimError::Config(e.to_string()))?;
    run_with(workload, catalog, config, heuristic, seed)
}

/// Run one simulation with any mapping heuristic.
pub fn run_with(
    workload: &Workload,
    catalog: &VmTypeCatalog,
    config: &SimConfig,
    heuristic: Arc<dyn MappingHeuristic>,
    seed: u64,
) -> Result<MetricsReport, SimError> {
    config.validate(catalog)?;
    workload.validate(catalog)?;
    engine::Engine::new(workload, catalog, config, heuristic, seed)?.run()
}
