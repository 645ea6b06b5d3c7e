//! Workload model: VM type catalog, GOP tasks, video streams and the ETC
//! (estimated time to compute) matrix.
//!
//! Streams arrive either from a trace file ([`load_trace`]) or from the
//! synthetic generator ([`generate_workload`]). Both produce a [`Workload`]
//! whose ETC matrix is complete over every (GOP, catalog type) pair.

mod generate;
mod trace;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_workload, partition_stream, ExecProfile, GeneratorParams};
pub use trace::{load_trace, parse_trace, write_trace};

/// Lower bound applied to sampled execution times, in seconds.
pub const EXEC_TIME_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown VM type `{0}`")]
    UnknownType(String),
    #[error("missing ETC entry for GOP {gop} on VM type `{type_id}`")]
    MissingEntry { gop: GopId, type_id: String },
    #[error("no ETC entry for GOP {gop} at type index {type_idx}")]
    Lookup { gop: GopId, type_idx: usize },
    #[error("invalid workload: {0}")]
    Validation(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreamId(pub u64);

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniquely identifies GOP `index` of stream `stream`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GopId {
    pub stream: StreamId,
    pub index: u32,
}

impl GopId {
    pub fn new(stream: u64, index: u32) -> Self {
        GopId {
            stream: StreamId(stream),
            index,
        }
    }
}

impl fmt::Display for GopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G({},{})", self.stream, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmTypeDescriptor {
    pub type_id: String,
    /// Price per charging cycle (one hour).
    pub hourly_cost: f64,
    #[serde(default)]
    pub label: String,
}

impl VmTypeDescriptor {
    pub fn new(type_id: impl Into<String>, hourly_cost: f64, label: impl Into<String>) -> Self {
        VmTypeDescriptor {
            type_id: type_id.into(),
            hourly_cost,
            label: label.into(),
        }
    }
}

/// Ordered set of VM types. Positions in the catalog are the type indices
/// used throughout the scheduler and provisioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VmTypeDescriptor>", into = "Vec<VmTypeDescriptor>")]
pub struct VmTypeCatalog {
    types: Vec<VmTypeDescriptor>,
}

impl VmTypeCatalog {
    pub fn new(types: Vec<VmTypeDescriptor>) -> Result<Self, WorkloadError> {
        let mut seen = HashSet::new();
        for t in &types {
            if !(t.hourly_cost > 0.0) || !t.hourly_cost.is_finite() {
                return Err(WorkloadError::Catalog(format!(
                    "type `{}` must have a positive hourly cost",
                    t.type_id
                )));
            }
            if !seen.insert(t.type_id.as_str()) {
                return Err(WorkloadError::Catalog(format!(
                    "duplicate type id `{}`",
                    t.type_id
                )));
            }
        }
        Ok(VmTypeCatalog { types })
    }

    /// The four EC2 instance types used in the experiments: GPU, CPU-optimized,
    /// memory-optimized and general purpose.
    pub fn ec2_default() -> Self {
        VmTypeCatalog {
            types: vec![
                VmTypeDescriptor::new("g2.2xlarge", 0.65, "GPU"),
                VmTypeDescriptor::new("c4.xlarge", 0.20, "CPU optimized"),
                VmTypeDescriptor::new("r3.xlarge", 0.33, "memory optimized"),
                VmTypeDescriptor::new("m4.large", 0.15, "general purpose"),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&VmTypeDescriptor> {
        self.types.get(idx)
    }

    pub fn position(&self, type_id: &str) -> Option<usize> {
        self.types.iter().position(|t| t.type_id == type_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VmTypeDescriptor> {
        self.types.iter()
    }

    pub fn hourly_costs(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.hourly_cost).collect()
    }

    /// A catalog restricted to `type_ids`, in the given order.
    pub fn subset(&self, type_ids: &[String]) -> Result<Self, WorkloadError> {
        let types = type_ids
            .iter()
            .map(|id| {
                self.position(id)
                    .map(|p| self.types[p].clone())
                    .ok_or_else(|| WorkloadError::UnknownType(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        VmTypeCatalog::new(types)
    }
}

impl TryFrom<Vec<VmTypeDescriptor>> for VmTypeCatalog {
    type Error = WorkloadError;

    fn try_from(types: Vec<VmTypeDescriptor>) -> Result<Self, Self::Error> {
        VmTypeCatalog::new(types)
    }
}

impl From<VmTypeCatalog> for Vec<VmTypeDescriptor> {
    fn from(c: VmTypeCatalog) -> Self {
        c.types
    }
}

/// Historic execution-time statistics of one GOP on one VM type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecEstimate {
    pub mean: f64,
    pub std_dev: f64,
}

impl ExecEstimate {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self, WorkloadError> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(WorkloadError::Validation(format!(
                "execution mean must be positive, got {mean}"
            )));
        }
        if !(std_dev >= 0.0) || !std_dev.is_finite() {
            return Err(WorkloadError::Validation(format!(
                "execution std dev must be non-negative, got {std_dev}"
            )));
        }
        Ok(ExecEstimate { mean, std_dev })
    }

    /// Worst-case estimate used by the scheduler: mean plus one standard deviation.
    pub fn worst_case(&self) -> f64 {
        self.mean + self.std_dev
    }
}

/// Per-(GOP, VM type) execution estimates. Each row is indexed by catalog position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtcMatrix {
    num_types: usize,
    rows: BTreeMap<GopId, Vec<ExecEstimate>>,
}

impl EtcMatrix {
    pub fn new(num_types: usize) -> Self {
        EtcMatrix {
            num_types,
            rows: BTreeMap::new(),
        }
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn insert_row(&mut self, gop: GopId, row: Vec<ExecEstimate>) -> Result<(), WorkloadError> {
        if row.len() != self.num_types {
            return Err(WorkloadError::Validation(format!(
                "ETC row for {gop} has {} entries, expected {}",
                row.len(),
                self.num_types
            )));
        }
        self.rows.insert(gop, row);
        Ok(())
    }

    pub fn get(&self, gop: GopId, type_idx: usize) -> Result<&ExecEstimate, WorkloadError> {
        self.rows
            .get(&gop)
            .and_then(|r| r.get(type_idx))
            .ok_or(WorkloadError::Lookup { gop, type_idx })
    }

    pub fn row(&self, gop: GopId) -> Option<&[ExecEstimate]> {
        self.rows.get(&gop).map(Vec::as_slice)
    }

    /// Number of (GOP, type) entries.
    pub fn len(&self) -> usize {
        self.rows.len() * self.num_types
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn gops(&self) -> impl Iterator<Item = &GopId> {
        self.rows.keys()
    }

    /// Re-index the matrix from catalog `from` onto catalog `to`, keeping only the
    /// types present in `to`.
    pub fn project(&self, from: &VmTypeCatalog, to: &VmTypeCatalog) -> Result<Self, WorkloadError> {
        let map = to
            .iter()
            .map(|t| {
                from.position(&t.type_id)
                    .ok_or_else(|| WorkloadError::UnknownType(t.type_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rows = self
            .rows
            .iter()
            .map(|(g, row)| (*g, map.iter().map(|&p| row[p]).collect()))
            .collect();
        Ok(EtcMatrix {
            num_types: to.len(),
            rows,
        })
    }

    /// Mean execution time per type over every GOP in the matrix.
    pub fn mean_per_type(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_types];
        for row in self.rows.values() {
            for (s, e) in sums.iter_mut().zip(row) {
                *s += e.mean;
            }
        }
        let n = self.rows.len().max(1) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GopTask {
    pub id: GopId,
    /// Presentation time of the GOP's first frame, relative to stream start.
    pub relative_deadline: f64,
    pub utility: f64,
    pub arrival_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoStream {
    pub id: StreamId,
    pub request_arrival_time: f64,
    pub duration: f64,
    pub gops: Vec<GopTask>,
    pub presentation_start: Option<f64>,
}

impl VideoStream {
    /// Build a stream whose GOP `j` has relative deadline `deadlines[j]`.
    pub fn new(id: StreamId, arrival: f64, duration: f64, deadlines: &[f64]) -> Self {
        let gops = deadlines
            .iter()
            .enumerate()
            .map(|(j, &d)| GopTask {
                id: GopId {
                    stream: id,
                    index: j as u32,
                },
                relative_deadline: d,
                utility: 1.0,
                arrival_time: arrival,
            })
            .collect();
        VideoStream {
            id,
            request_arrival_time: arrival,
            duration,
            gops,
            presentation_start: None,
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let mut prev: Option<f64> = None;
        for (j, g) in self.gops.iter().enumerate() {
            if g.id.index as usize != j || g.id.stream != self.id {
                return Err(WorkloadError::Validation(format!(
                    "stream {} has a gap or foreign GOP at position {j}",
                    self.id
                )));
            }
            match prev {
                None if g.relative_deadline != 0.0 => {
                    return Err(WorkloadError::Validation(format!(
                        "stream {}: GOP 0 must have relative deadline 0",
                        self.id
                    )))
                }
                Some(p) if g.relative_deadline <= p => {
                    return Err(WorkloadError::Validation(format!(
                        "stream {}: relative deadlines must increase (GOP {j})",
                        self.id
                    )))
                }
                _ => {}
            }
            prev = Some(g.relative_deadline);
        }
        Ok(())
    }
}

/// Streams sorted by request arrival plus their ETC matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub streams: Vec<VideoStream>,
    pub etc: EtcMatrix,
}

impl Workload {
    /// Check per-stream GOP ordering and ETC completeness.
    pub fn validate(&self, catalog: &VmTypeCatalog) -> Result<(), WorkloadError> {
        if !self.streams.is_empty() && self.etc.num_types() != catalog.len() {
            return Err(WorkloadError::Validation(format!(
                "ETC matrix covers {} types but the catalog has {}",
                self.etc.num_types(),
                catalog.len()
            )));
        }
        for s in &self.streams {
            s.validate()?;
            for g in &s.gops {
                if self.etc.row(g.id).is_none() {
                    let type_id = catalog
                        .get(0)
                        .map(|t| t.type_id.clone())
                        .unwrap_or_default();
                    return Err(WorkloadError::MissingEntry { gop: g.id, type_id });
                }
            }
        }
        Ok(())
    }

    pub fn total_gops(&self) -> usize {
        self.streams.iter().map(|s| s.gops.len()).sum()
    }

    /// The same workload restricted to the types of `to`.
    pub fn project(&self, from: &VmTypeCatalog, to: &VmTypeCatalog) -> Result<Self, WorkloadError> {
        Ok(Workload {
            streams: self.streams.clone(),
            etc: self.etc.project(from, to)?,
        })
    }
}

pub fn worst_case_exec(etc: &EtcMatrix, gop: GopId, type_idx: usize) -> Result<f64, WorkloadError> {
    etc.get(gop, type_idx).map(ExecEstimate::worst_case)
}

/// Draw an actual execution time from Normal(mean, std_dev), floored at
/// [`EXEC_TIME_FLOOR`].
pub fn sample_exec_time<R: Rng + ?Sized>(
    etc: &EtcMatrix,
    gop: GopId,
    type_idx: usize,
    rng: &mut R,
) -> Result<f64, WorkloadError> {
    Ok(sample_estimate(etc.get(gop, type_idx)?, rng))
}

pub(crate) fn sample_estimate<R: Rng + ?Sized>(e: &ExecEstimate, rng: &mut R) -> f64 {
    if e.std_dev == 0.0 {
        return e.mean.max(EXEC_TIME_FLOOR);
    }
    // std_dev > 0 and finite, checked at construction
    let normal = Normal::new(e.mean, e.std_dev).expect("valid normal parameters");
    normal.sample(rng).max(EXEC_TIME_FLOOR)
}
