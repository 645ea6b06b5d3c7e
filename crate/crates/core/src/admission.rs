//! Admission control: utility assignment, the batch queue, the virtual queue
//! and merger-driven resubmission.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::{GopId, GopTask, StreamId, VideoStream};

#[derive(Debug, Error, PartialEq)]
pub enum AdmissionError {
    #[error("stream {0} was already admitted")]
    DuplicateStream(StreamId),
    #[error("unknown GOP {0}")]
    UnknownGop(GopId),
    #[error("GOP {0} was already delivered")]
    AlreadyDelivered(GopId),
    #[error("GOP {0} is not pending")]
    NotPending(GopId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityParams {
    /// Slope of the exponential decay.
    pub c: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams { c: 0.1 }
    }
}

/// Exponentially decaying utility `(1/e)^(c * index)`.
pub fn utility(index: u32, params: &UtilityParams) -> f64 {
    (-params.c * index as f64).exp()
}

/// Any priority function over GOP position. Implementations must be strictly
/// decreasing in `index` and map into `(0, 1]`.
pub trait UtilityFunction: Send + Sync + std::fmt::Debug {
    fn utility(&self, index: u32) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialUtility(pub UtilityParams);

impl UtilityFunction for ExponentialUtility {
    fn utility(&self, index: u32) -> f64 {
        utility(index, &self.0)
    }
}

/// Utility given to resubmitted GOPs.
pub const RESUBMITTED_UTILITY: f64 = 1.0;

/// Unscheduled GOPs, per stream in index order.
#[derive(Debug, Clone, Default)]
pub struct BatchQueue {
    pending: BTreeMap<StreamId, BTreeSet<u32>>,
    priority: BTreeSet<GopId>,
    len: usize,
}

impl BatchQueue {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, gop: GopId) -> bool {
        self.pending
            .get(&gop.stream)
            .is_some_and(|s| s.contains(&gop.index))
    }

    pub fn is_priority(&self, gop: GopId) -> bool {
        self.priority.contains(&gop)
    }

    fn push(&mut self, gop: GopId) -> bool {
        let inserted = self.pending.entry(gop.stream).or_default().insert(gop.index);
        if inserted {
            self.len += 1;
        }
        inserted
    }

    fn remove(&mut self, gop: GopId) -> bool {
        let Some(set) = self.pending.get_mut(&gop.stream) else {
            return false;
        };
        let removed = set.remove(&gop.index);
        if set.is_empty() {
            self.pending.remove(&gop.stream);
        }
        if removed {
            self.len -= 1;
            self.priority.remove(&gop);
        }
        removed
    }

    pub fn streams(&self) -> impl Iterator<Item = (&StreamId, &BTreeSet<u32>)> {
        self.pending.iter()
    }

    pub fn iter(&self) -> impl Iterator<Item = GopId> + '_ {
        self.pending.iter().flat_map(|(s, set)| {
            set.iter().map(move |&index| GopId { stream: *s, index })
        })
    }

    /// Each stream's lowest-index regular pending GOP plus every flagged GOP,
    /// ordered by stream then index.
    pub fn virtual_queue_ids(&self) -> Vec<(GopId, bool)> {
        let mut out = Vec::with_capacity(self.pending.len() + self.priority.len());
        if self.priority.is_empty() {
            out.extend(self.pending.iter().filter_map(|(s, set)| {
                set.first().map(|&index| (GopId { stream: *s, index }, false))
            }));
            return out;
        }
        for (s, set) in &self.pending {
            let lo = GopId { stream: *s, index: 0 };
            let hi = GopId { stream: *s, index: u32::MAX };
            let start = out.len();
            out.extend(self.priority.range(lo..=hi).map(|g| (*g, true)));
            if let Some(&index) = set
                .iter()
                .find(|&&i| !self.priority.contains(&GopId { stream: *s, index: i }))
            {
                out.push((GopId { stream: *s, index }, false));
                out[start..].sort_by_key(|(g, _)| g.index);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualQueueEntry {
    pub gop: GopId,
    pub utility: f64,
    pub resubmitted: bool,
}

/// GOPs offered to the mapping heuristic at one scheduling event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VirtualQueue {
    pub entries: Vec<VirtualQueueEntry>,
}

impl VirtualQueue {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GopState {
    Pending,
    Dispatched,
    Delivered,
}

#[derive(Debug, Clone)]
struct Tracked {
    state: GopState,
    utility: f64,
}

/// Owns the lifecycle of every admitted GOP: pending in the batch queue,
/// dispatched to a VM, or delivered to the merger.
#[derive(Debug, Clone)]
pub struct AdmissionControl {
    utility: Arc<dyn UtilityFunction>,
    queue: BatchQueue,
    gops: HashMap<GopId, Tracked>,
    streams: HashSet<StreamId>,
    delivered: usize,
    dispatched: usize,
}

impl AdmissionControl {
    pub fn new(params: UtilityParams) -> Self {
        Self::with_utility(Arc::new(ExponentialUtility(params)))
    }

    pub fn with_utility(utility: Arc<dyn UtilityFunction>) -> Self {
        AdmissionControl {
            utility,
            queue: BatchQueue::default(),
            gops: HashMap::new(),
            streams: HashSet::new(),
            delivered: 0,
            dispatched: 0,
        }
    }

    pub fn batch_queue(&self) -> &BatchQueue {
        &self.queue
    }

    /// Assign utilities and append the stream's GOPs to the batch queue.
    pub fn admit_stream(&mut self, stream: &VideoStream, now: f64) -> Result<Vec<GopTask>, AdmissionError> {
        if !self.streams.insert(stream.id) {
            return Err(AdmissionError::DuplicateStream(stream.id));
        }
        let tasks: Vec<GopTask> = stream
            .gops
            .iter()
            .map(|g| GopTask {
                utility: self.utility.utility(g.id.index),
                arrival_time: now,
                ..g.clone()
            })
            .collect();
        for t in &tasks {
            self.queue.push(t.id);
            self.gops.insert(
                t.id,
                Tracked {
                    state: GopState::Pending,
                    utility: t.utility,
                },
            );
        }
        Ok(tasks)
    }

    pub fn refresh_virtual_queue(&self) -> VirtualQueue {
        let entries = self
            .queue
            .virtual_queue_ids()
            .into_iter()
            .map(|(gop, resubmitted)| VirtualQueueEntry {
                gop,
                utility: if resubmitted {
                    RESUBMITTED_UTILITY
                } else {
                    self.gops[&gop].utility
                },
                resubmitted,
            })
            .collect();
        VirtualQueue { entries }
    }

    pub fn state(&self, gop: GopId) -> Option<GopState> {
        self.gops.get(&gop).map(|t| t.state)
    }

    /// Move a pending GOP out of the batch queue onto a VM.
    pub fn dispatch(&mut self, gop: GopId) -> Result<(), AdmissionError> {
        let t = self.gops.get_mut(&gop).ok_or(AdmissionError::UnknownGop(gop))?;
        if t.state != GopState::Pending {
            return Err(AdmissionError::NotPending(gop));
        }
        t.state = GopState::Dispatched;
        self.queue.remove(gop);
        self.dispatched += 1;
        Ok(())
    }

    /// Record delivery. Returns `false` for a duplicate delivery of an
    /// already-delivered GOP. A pending resubmitted copy is withdrawn.
    pub fn deliver(&mut self, gop: GopId) -> Result<bool, AdmissionError> {
        let t = self.gops.get_mut(&gop).ok_or(AdmissionError::UnknownGop(gop))?;
        match t.state {
            GopState::Delivered => Ok(false),
            prev => {
                t.state = GopState::Delivered;
                if prev == GopState::Pending {
                    self.queue.remove(gop);
                } else {
                    self.dispatched -= 1;
                }
                self.delivered += 1;
                Ok(true)
            }
        }
    }

    /// Put a dispatched but undelivered GOP back into the batch queue with
    /// high priority. Idempotent while the GOP is pending.
    pub fn resubmit(&mut self, gop: GopId) -> Result<(), AdmissionError> {
        let t = self.gops.get_mut(&gop).ok_or(AdmissionError::UnknownGop(gop))?;
        match t.state {
            GopState::Delivered => Err(AdmissionError::AlreadyDelivered(gop)),
            GopState::Pending => {
                self.queue.priority.insert(gop);
                Ok(())
            }
            GopState::Dispatched => {
                t.state = GopState::Pending;
                self.dispatched -= 1;
                self.queue.push(gop);
                self.queue.priority.insert(gop);
                Ok(())
            }
        }
    }

    pub fn admitted(&self) -> usize {
        self.gops.len()
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    pub fn in_flight(&self) -> usize {
        self.dispatched
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}
