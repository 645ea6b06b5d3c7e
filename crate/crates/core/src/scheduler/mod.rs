//! Completion-time estimation and batch-mode mapping of virtual-queue GOPs
//! onto VM local queues.
//!
//! Every heuristic follows the same two steps: phase 1 pairs each GOP with
//! the VM giving its minimum estimated completion time, and phase 2 picks
//! one pair according to a performance objective and commits it. The loop
//! repeats until the queue is exhausted or no VM has a free slot. The
//! utility-based variants add a third step that lets the highest-utility
//! GOP of the chosen VM jump ahead when doing so keeps the objective's pick
//! within its deadline.

mod heuristics;
mod registry;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::workload::{worst_case_exec, EtcMatrix, GopId, WorkloadError};

pub use heuristics::{
    map_mm, map_msd, map_mmu, map_utility, map_utility_traced, Objective, TwoPhase, UtilityBased, UtilityStep,
};
pub use registry::{HeuristicKind, HeuristicRegistry, MappingHeuristic};

/// Tasks that may wait in a VM's local queue behind the executing one.
pub const LOCAL_QUEUE_CAPACITY: usize = 2;

/// Scheduler view of one VM.
#[derive(Debug, Clone, PartialEq)]
pub struct VmQueueState {
    pub vm_id: usize,
    pub type_idx: usize,
    pub hourly_cost: f64,
    /// Executing GOP with its remaining worst-case estimate.
    pub executing: Option<(GopId, f64)>,
    /// Waiting GOPs (FCFS) with their worst-case estimates.
    pub local_queue: Vec<(GopId, f64)>,
    /// Set when the VM is marked for deallocation: work must finish by this time.
    pub accept_until: Option<f64>,
}

impl VmQueueState {
    pub fn idle(vm_id: usize, type_idx: usize, hourly_cost: f64) -> Self {
        VmQueueState {
            vm_id,
            type_idx,
            hourly_cost,
            executing: None,
            local_queue: Vec::with_capacity(LOCAL_QUEUE_CAPACITY),
            accept_until: None,
        }
    }

    pub fn has_free_slot(&self) -> bool {
        self.local_queue.len() < LOCAL_QUEUE_CAPACITY
    }

    /// `t_r` plus the worst-case time of everything already queued.
    pub fn backlog(&self) -> f64 {
        self.executing.map_or(0.0, |(_, r)| r) + self.local_queue.iter().map(|(_, t)| t).sum::<f64>()
    }

    /// Estimated completion of a task with worst-case time `tau` appended now.
    pub fn estimate(&self, now: f64, tau: f64) -> f64 {
        now + self.backlog() + tau
    }

    /// Whether a task finishing at `completion` may be placed here.
    pub fn accepts(&self, completion: f64) -> bool {
        self.accept_until.is_none_or(|limit| completion <= limit)
    }

    /// Place a GOP on this VM: it starts at once on an idle VM, else it waits.
    pub fn commit(&mut self, gop: GopId, tau: f64) {
        if self.executing.is_none() && self.local_queue.is_empty() {
            self.executing = Some((gop, tau));
        } else {
            self.local_queue.push((gop, tau));
        }
    }
}

/// A virtual-queue GOP as seen by the heuristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<'a> {
    pub gop: GopId,
    pub utility: f64,
    /// Absolute deadline Δ.
    pub deadline: f64,
    /// Worst-case execution time per catalog type index.
    pub exec: &'a [f64],
}

impl Candidate<'_> {
    pub fn tau(&self, vm: &VmQueueState) -> f64 {
        self.exec[vm.type_idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub gop: GopId,
    pub vm_id: usize,
    pub estimated_completion: f64,
}

/// Phase-1 pairing of candidate `cand` with VM `vm` (both positions in the
/// slices handed to the heuristic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub cand: usize,
    pub vm: usize,
    pub est: f64,
}

/// Completion time of `gop` if appended to `vm` at `now`:
/// `now + t_r + Σ queued worst cases + τ(gop, vm type)`.
pub fn estimate_completion(
    gop: GopId,
    vm: &VmQueueState,
    now: f64,
    etc: &EtcMatrix,
) -> Result<f64, WorkloadError> {
    Ok(vm.estimate(now, worst_case_exec(etc, gop, vm.type_idx)?))
}

fn vm_preference(a: &VmQueueState, b: &VmQueueState) -> Ordering {
    a.hourly_cost
        .total_cmp(&b.hourly_cost)
        .then(a.vm_id.cmp(&b.vm_id))
}

/// VMs with a free slot and their current backlogs, kept in step with
/// commits so phase 1 does not rescan full VMs.
#[derive(Debug, Clone)]
pub(crate) struct SlotIndex {
    open: Vec<usize>,
    backlog: Vec<f64>,
}

impl SlotIndex {
    pub(crate) fn new(vms: &[VmQueueState]) -> Self {
        SlotIndex {
            open: (0..vms.len()).filter(|&m| vms[m].has_free_slot()).collect(),
            backlog: vms.iter().map(VmQueueState::backlog).collect(),
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    /// Refresh VM `m` after a commit.
    pub(crate) fn update(&mut self, m: usize, vms: &[VmQueueState]) {
        self.backlog[m] = vms[m].backlog();
        if !vms[m].has_free_slot() {
            self.open.retain(|&x| x != m);
        }
    }

    pub(crate) fn best(&self, c: &Candidate<'_>, vms: &[VmQueueState], now: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &m in &self.open {
            let vm = &vms[m];
            let est = now + self.backlog[m] + c.tau(vm);
            if !vm.accepts(est) {
                continue;
            }
            best = match best {
                None => Some((m, est)),
                Some((bm, be)) => {
                    let ord = est.total_cmp(&be).then_with(|| vm_preference(vm, &vms[bm]));
                    if ord == Ordering::Less {
                        Some((m, est))
                    } else {
                        Some((bm, be))
                    }
                }
            };
        }
        best
    }
}

/// For each candidate, the VM that minimizes its estimated completion time.
/// Ties go to the cheaper VM, then the lower `vm_id`. GOPs that fit nowhere
/// are left out.
pub fn phase1_pairs(queue: &[Candidate<'_>], vms: &[VmQueueState], now: f64) -> Vec<Pair> {
    let open = SlotIndex::new(vms);
    queue
        .iter()
        .enumerate()
        .filter_map(|(i, c)| open.best(c, vms, now).map(|(vm, est)| Pair { cand: i, vm, est }))
        .collect()
}
