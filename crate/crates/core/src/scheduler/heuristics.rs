use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Assignment, Candidate, MappingHeuristic, Pair, SlotIndex, VmQueueState};

/// Phase-2 performance objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinCompletion,
    SoonestDeadline,
    /// Shortest slack, `Δ - estimated completion`.
    MaxUrgency,
}

impl Objective {
    fn key(self, c: &Candidate<'_>, est: f64) -> f64 {
        match self {
            Objective::MinCompletion => est,
            Objective::SoonestDeadline => c.deadline,
            Objective::MaxUrgency => c.deadline - est,
        }
    }

    /// Ordering of two pairs under this objective; ties fall back to the
    /// earlier completion estimate, then the lower GOP id.
    fn compare(self, queue: &[Candidate<'_>], a: &Pair, b: &Pair) -> Ordering {
        let (ca, cb) = (&queue[a.cand], &queue[b.cand]);
        self.key(ca, a.est)
            .total_cmp(&self.key(cb, b.est))
            .then(a.est.total_cmp(&b.est))
            .then(ca.gop.cmp(&cb.gop))
    }

    fn pick(self, queue: &[Candidate<'_>], pairs: &[Pair]) -> Pair {
        *pairs
            .iter()
            .min_by(|a, b| self.compare(queue, a, b))
            .expect("non-empty pair list")
    }
}

/// Incrementally maintained phase-1 result. Committing to VM `m` only makes
/// `m` worse, so only candidates whose best VM was `m` need a new search.
struct Phase1<'q, 'a> {
    queue: &'q [Candidate<'a>],
    slots: SlotIndex,
    best: Vec<Option<(usize, f64)>>,
    active: Vec<bool>,
}

impl<'q, 'a> Phase1<'q, 'a> {
    fn new(queue: &'q [Candidate<'a>], vms: &[VmQueueState], now: f64) -> Self {
        let slots = SlotIndex::new(vms);
        let best = queue.iter().map(|c| slots.best(c, vms, now)).collect();
        Phase1 {
            queue,
            slots,
            best,
            active: vec![true; queue.len()],
        }
    }

    fn pairs(&self) -> Vec<Pair> {
        if self.slots.is_empty() {
            return Vec::new();
        }
        self.best
            .iter()
            .enumerate()
            .filter(|(i, _)| self.active[*i])
            .filter_map(|(i, b)| b.map(|(vm, est)| Pair { cand: i, vm, est }))
            .collect()
    }

    fn commit(&mut self, p: &Pair, vms: &mut [VmQueueState], now: f64) -> Assignment {
        let c = &self.queue[p.cand];
        let tau = c.tau(&vms[p.vm]);
        vms[p.vm].commit(c.gop, tau);
        self.slots.update(p.vm, vms);
        self.active[p.cand] = false;
        if !self.slots.is_empty() {
            for i in 0..self.queue.len() {
                if self.active[i] && self.best[i].is_some_and(|(vm, _)| vm == p.vm) {
                    self.best[i] = self.slots.best(&self.queue[i], vms, now);
                }
            }
        }
        Assignment {
            gop: c.gop,
            vm_id: vms[p.vm].vm_id,
            estimated_completion: p.est,
        }
    }
}

fn two_phase(queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64, objective: Objective) -> Vec<Assignment> {
    let mut phase1 = Phase1::new(queue, vms, now);
    let mut out = Vec::new();
    loop {
        let pairs = phase1.pairs();
        if pairs.is_empty() {
            break;
        }
        let p = objective.pick(queue, &pairs);
        out.push(phase1.commit(&p, vms, now));
    }
    out
}

/// One phase-3 decision of a utility-based heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityStep {
    pub committed: Assignment,
    pub objective_pick: Assignment,
    pub objective_deadline: f64,
    /// Completion of the objective's pick re-estimated with the utility pick
    /// placed ahead of it on the same VM; `None` when both picks coincide.
    pub recheck: Option<f64>,
}

fn utility_pick(queue: &[Candidate<'_>], pairs: &[Pair], vm: usize, obj: &Pair) -> Pair {
    *pairs
        .iter()
        .filter(|p| p.vm == vm)
        .min_by(|a, b| {
            let (ca, cb) = (&queue[a.cand], &queue[b.cand]);
            cb.utility
                .total_cmp(&ca.utility)
                .then_with(|| (b.cand == obj.cand).cmp(&(a.cand == obj.cand)))
                .then(ca.gop.cmp(&cb.gop))
        })
        .expect("objective pick belongs to its own VM")
}

fn utility_based(
    queue: &[Candidate<'_>],
    vms: &mut [VmQueueState],
    now: f64,
    objective: Objective,
    mut trace: Option<&mut Vec<UtilityStep>>,
) -> Vec<Assignment> {
    let mut phase1 = Phase1::new(queue, vms, now);
    let mut out = Vec::new();
    loop {
        let pairs = phase1.pairs();
        if pairs.is_empty() {
            break;
        }
        let obj = objective.pick(queue, &pairs);
        let ut = utility_pick(queue, &pairs, obj.vm, &obj);
        let obj_c = &queue[obj.cand];
        let obj_assignment = Assignment {
            gop: obj_c.gop,
            vm_id: vms[obj.vm].vm_id,
            estimated_completion: obj.est,
        };
        let (chosen, recheck) = if ut.cand == obj.cand {
            (obj, None)
        } else {
            let ut_c = &queue[ut.cand];
            let mut hypothetical = vms[obj.vm].clone();
            hypothetical.commit(ut_c.gop, ut_c.tau(&hypothetical));
            let phi = hypothetical.estimate(now, obj_c.tau(&hypothetical));
            if phi <= obj_c.deadline {
                (ut, Some(phi))
            } else {
                (obj, Some(phi))
            }
        };
        let committed = phase1.commit(&chosen, vms, now);
        if let Some(t) = trace.as_deref_mut() {
            t.push(UtilityStep {
                committed,
                objective_pick: obj_assignment,
                objective_deadline: obj_c.deadline,
                recheck,
            });
        }
        out.push(committed);
    }
    out
}

/// MinCompletion-MinCompletion.
pub fn map_mm(queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment> {
    two_phase(queue, vms, now, Objective::MinCompletion)
}

/// MinCompletion-SoonestDeadline.
pub fn map_msd(queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment> {
    two_phase(queue, vms, now, Objective::SoonestDeadline)
}

/// MinCompletion-MaxUrgency.
pub fn map_mmu(queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment> {
    two_phase(queue, vms, now, Objective::MaxUrgency)
}

/// Utility-based variant of the heuristic with phase-2 `objective`
/// (MMUT, MSDUT, MMUUT).
pub fn map_utility(
    queue: &[Candidate<'_>],
    vms: &mut [VmQueueState],
    now: f64,
    objective: Objective,
) -> Vec<Assignment> {
    utility_based(queue, vms, now, objective, None)
}

/// [`map_utility`] that also reports each phase-3 decision.
pub fn map_utility_traced(
    queue: &[Candidate<'_>],
    vms: &mut [VmQueueState],
    now: f64,
    objective: Objective,
) -> (Vec<Assignment>, Vec<UtilityStep>) {
    let mut steps = Vec::new();
    let out = utility_based(queue, vms, now, objective, Some(&mut steps));
    (out, steps)
}

/// Traditional two-phase heuristic.
#[derive(Debug, Clone, Copy)]
pub struct TwoPhase {
    pub name: &'static str,
    pub objective: Objective,
}

impl MappingHeuristic for TwoPhase {
    fn name(&self) -> &str {
        self.name
    }

    fn map(&self, queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment> {
        two_phase(queue, vms, now, self.objective)
    }
}

/// Two-phase heuristic with the utility override.
#[derive(Debug, Clone, Copy)]
pub struct UtilityBased {
    pub name: &'static str,
    pub objective: Objective,
}

impl MappingHeuristic for UtilityBased {
    fn name(&self) -> &str {
        self.name
    }

    fn map(&self, queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment> {
        utility_based(queue, vms, now, self.objective, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::GopId;

    fn cand<'a>(s: u64, j: u32, utility: f64, deadline: f64, exec: &'a [f64]) -> Candidate<'a> {
        Candidate {
            gop: GopId::new(s, j),
            utility,
            deadline,
            exec,
        }
    }

    fn busy(id: usize, backlog: f64) -> VmQueueState {
        let mut v = VmQueueState::idle(id, 0, 0.2);
        if backlog > 0.0 {
            v.executing = Some((GopId::new(99, id as u32), backlog));
        }
        v
    }

    #[test]
    fn mm_single_slot_takes_global_min() {
        let (ea, eb) = ([8.0], [5.0]);
        let q = [cand(0, 0, 1.0, 100.0, &ea), cand(1, 0, 1.0, 100.0, &eb)];
        let mut v = busy(0, 1.0);
        v.local_queue.push((GopId::new(98, 0), 1.0));
        let mut vms = [v];
        let out = map_mm(&q, &mut vms, 0.0);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].gop, GopId::new(1, 0));
        assert_eq!(out[0].estimated_completion, 7.0);
    }

    #[test]
    fn mm_single_gop_single_vm() {
        let e = [2.0];
        let q = [cand(0, 0, 1.0, 10.0, &e)];
        let mut vms = [busy(0, 0.0)];
        let out = map_mm(&q, &mut vms, 5.0);
        assert_eq!(out, vec![Assignment { gop: GopId::new(0, 0), vm_id: 0, estimated_completion: 7.0 }]);
        assert_eq!(vms[0].executing, Some((GopId::new(0, 0), 2.0)));
    }

    #[test]
    fn mm_commits_shortest_first_on_identical_vms() {
        let (a, b, c) = ([3.0], [1.0], [2.0]);
        let q = [cand(0, 0, 1.0, 1e9, &a), cand(1, 0, 1.0, 1e9, &b), cand(2, 0, 1.0, 1e9, &c)];
        let mut vms: Vec<_> = (0..4).map(|i| busy(i, 0.0)).collect();
        let out = map_mm(&q, &mut vms, 0.0);
        let order: Vec<u64> = out.iter().map(|a| a.gop.stream.0).collect();
        assert_eq!(order, vec![1, 2, 0]);
        let used: Vec<usize> = out.iter().map(|a| a.vm_id).collect();
        assert_eq!(used, vec![0, 1, 2]);
    }

    #[test]
    fn msd_prefers_soonest_deadline() {
        let e = [1.0];
        let q = [cand(0, 0, 1.0, 50.0, &e), cand(1, 0, 1.0, 40.0, &e)];
        let mut vms = [busy(0, 0.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.5));
        let out = map_msd(&q, &mut vms, 0.0);
        assert_eq!(out[0].gop, GopId::new(1, 0));
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn msd_deadline_tie_prefers_earlier_completion() {
        let (ea, eb) = ([30.0], [20.0]);
        let q = [cand(0, 0, 1.0, 40.0, &ea), cand(1, 0, 1.0, 40.0, &eb)];
        let mut vms = [busy(0, 0.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.0));
        let out = map_msd(&q, &mut vms, 0.0);
        assert_eq!(out[0].gop, GopId::new(1, 0));
    }

    #[test]
    fn singleton_matches_mm() {
        let e = [4.0, 2.0];
        let q = [cand(3, 1, 0.9, 12.0, &e)];
        let mk = || vec![VmQueueState::idle(0, 0, 0.2), VmQueueState::idle(1, 1, 0.65)];
        let base = map_mm(&q, &mut mk(), 0.0);
        assert_eq!(map_msd(&q, &mut mk(), 0.0), base);
        assert_eq!(map_mmu(&q, &mut mk(), 0.0), base);
        for o in [Objective::MinCompletion, Objective::SoonestDeadline, Objective::MaxUrgency] {
            assert_eq!(map_utility(&q, &mut mk(), 0.0, o), base);
        }
    }

    #[test]
    fn mmu_prefers_negative_slack() {
        // slack = Δ - est: pair A slack 5, pair B slack -2
        let (ea, eb) = ([5.0], [4.0]);
        let q = [cand(0, 0, 1.0, 10.0, &ea), cand(1, 0, 1.0, 2.0, &eb)];
        let mut vms = [busy(0, 0.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.0));
        let out = map_mmu(&q, &mut vms, 0.0);
        assert_eq!(out[0].gop, GopId::new(1, 0));
    }

    #[test]
    fn mmu_slack_tie_prefers_earlier_completion() {
        // both slack 1: (Δ 6, est 5) vs (Δ 4, est 3)
        let (ea, eb) = ([5.0], [3.0]);
        let q = [cand(0, 0, 1.0, 6.0, &ea), cand(1, 0, 1.0, 4.0, &eb)];
        let mut vms = [busy(0, 0.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.0));
        let out = map_mmu(&q, &mut vms, 0.0);
        assert_eq!(out[0].gop, GopId::new(1, 0));
    }

    // G_a: shorter (MM pick), low utility. G_b: higher utility, longer.
    #[test]
    fn utility_pick_committed_when_deadline_preserved() {
        let (ea, eb) = ([2.0], [3.0]);
        let q = [cand(0, 5, 0.6, 10.0, &ea), cand(1, 0, 1.0, 100.0, &eb)];
        let mut vms = [busy(0, 1.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.0));
        // MM would pick G_a (est 3); with G_b ahead G_a finishes at 1+3+2 = 6 <= 10
        let (out, steps) = map_utility_traced(&q, &mut vms, 0.0, Objective::MinCompletion);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].gop, GopId::new(1, 0));
        assert_eq!(steps[0].objective_pick.gop, GopId::new(0, 5));
        assert_eq!(steps[0].recheck, Some(6.0));
    }

    #[test]
    fn objective_pick_kept_when_deadline_would_break() {
        let (ea, eb) = ([2.0], [3.0]);
        let q = [cand(0, 5, 0.6, 5.0, &ea), cand(1, 0, 1.0, 100.0, &eb)];
        let mut vms = [busy(0, 1.0)];
        vms[0].local_queue.push((GopId::new(98, 0), 0.0));
        let (out, steps) = map_utility_traced(&q, &mut vms, 0.0, Objective::MinCompletion);
        assert_eq!(out[0].gop, GopId::new(0, 5));
        assert_eq!(steps[0].recheck, Some(6.0));
    }

    #[test]
    fn coincident_picks_commit_directly() {
        let (ea, eb) = ([1.0], [3.0]);
        let q = [cand(0, 0, 1.0, 0.5, &ea), cand(1, 4, 0.5, 100.0, &eb)];
        let mut vms = [busy(0, 0.0)];
        let (out, steps) = map_utility_traced(&q, &mut vms, 0.0, Objective::MinCompletion);
        assert_eq!(out[0].gop, GopId::new(0, 0));
        assert_eq!(steps[0].recheck, None);
    }
}
