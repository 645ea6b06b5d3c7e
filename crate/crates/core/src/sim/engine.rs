use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::event::{EventKind, EventQueue};
use super::merger::OutputWindow;
use super::{
    AllocationCause, DeallocAudit, DeallocTrigger, MetricsReport, ProvisioningMode, ProvisioningRecord,
    SimConfig, SimError, VmBill, EARLY_GOPS,
};
use crate::admission::{AdmissionControl, GopState, RESUBMITTED_UTILITY};
use crate::provisioner::{
    allocation_policy, argmax_suitability, deallocation_policy, remedial_policy, suitability_scores,
    AllocationInputs, DeallocationDecision, DmrTracker, VmSnapshot,
};
use crate::scheduler::{Candidate, MappingHeuristic, VmQueueState, LOCAL_QUEUE_CAPACITY};
use crate::workload::{sample_estimate, GopId, StreamId, VmTypeCatalog, Workload};

#[derive(Debug)]
struct StreamRt {
    arrival: f64,
    psi: Option<f64>,
    deadlines: Vec<f64>,
    /// Worst-case execution time, `num_types` entries per GOP.
    wc: Vec<f64>,
    /// Mean execution time across catalog types, per GOP.
    mean_exec: Vec<f64>,
    gop_type: Vec<usize>,
    utility: Vec<f64>,
    dispatches: Vec<u32>,
    window: OutputWindow,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    gop: GopId,
    start: f64,
    tau: f64,
}

#[derive(Debug)]
struct Vm {
    type_idx: usize,
    hourly: f64,
    allocated_at: f64,
    cycles_paid: u32,
    marked: bool,
    released_at: Option<f64>,
    executing: Option<Running>,
    queue: VecDeque<(GopId, f64)>,
    busy: VecDeque<(f64, f64)>,
}

impl Vm {
    fn alive(&self) -> bool {
        self.released_at.is_none()
    }

    fn idle(&self) -> bool {
        self.executing.is_none() && self.queue.is_empty()
    }

    fn has_slot(&self) -> bool {
        self.alive() && self.queue.len() < LOCAL_QUEUE_CAPACITY
    }

    fn cycle_end(&self, cycle: f64) -> f64 {
        self.allocated_at + self.cycles_paid as f64 * cycle
    }

    fn utilization(&mut self, now: f64, window: f64) -> f64 {
        let span = window.min(now - self.allocated_at);
        if span <= 0.0 {
            return 0.0;
        }
        let from = now - span;
        while self.busy.front().is_some_and(|&(_, end)| end <= now - window) {
            self.busy.pop_front();
        }
        let busy: f64 = self
            .busy
            .iter()
            .map(|&(s, e)| (e.min(now) - s.max(from)).max(0.0))
            .sum();
        (busy / span).clamp(0.0, 1.0)
    }

    fn write_view(&self, vm_id: usize, now: f64, cycle: f64, out: &mut VmQueueState) {
        out.vm_id = vm_id;
        out.type_idx = self.type_idx;
        out.hourly_cost = self.hourly;
        out.executing = self
            .executing
            .map(|r| (r.gop, (r.start + r.tau - now).max(0.0)));
        out.local_queue.clear();
        out.local_queue.extend(self.queue.iter().copied());
        out.accept_until = self.marked.then(|| self.cycle_end(cycle));
    }
}

/// Refresh scheduler views of live VMs into `buf`, reusing its storage.
fn fill_views(vms: &[Vm], buf: &mut Vec<VmQueueState>, now: f64, cycle: f64, include_marked: bool) {
    let mut k = 0;
    for (id, v) in vms.iter().enumerate() {
        if !v.alive() || (v.marked && !include_marked) {
            continue;
        }
        if k == buf.len() {
            buf.push(VmQueueState::idle(id, v.type_idx, v.hourly));
        }
        v.write_view(id, now, cycle, &mut buf[k]);
        k += 1;
    }
    buf.truncate(k);
}

/// Stream id to workload position; a flat table when ids are dense.
#[derive(Debug)]
enum StreamLookup {
    Dense(Vec<usize>),
    Sparse(HashMap<StreamId, usize>),
}

impl StreamLookup {
    fn new(positions: Vec<(StreamId, usize)>) -> Self {
        let max = positions.iter().map(|(id, _)| id.0).max().unwrap_or(0);
        if max < 4 * positions.len() as u64 + 16 {
            let mut table = vec![usize::MAX; max as usize + 1];
            for (id, pos) in positions {
                table[id.0 as usize] = pos;
            }
            StreamLookup::Dense(table)
        } else {
            StreamLookup::Sparse(positions.into_iter().collect())
        }
    }

    fn get(&self, id: StreamId) -> usize {
        match self {
            StreamLookup::Dense(t) => t[id.0 as usize],
            StreamLookup::Sparse(m) => m[&id],
        }
    }
}

pub(super) struct Engine<'a> {
    workload: &'a Workload,
    catalog: &'a VmTypeCatalog,
    cfg: &'a SimConfig,
    heuristic: Arc<dyn MappingHeuristic>,
    rng: ChaCha8Rng,
    events: EventQueue,
    now: f64,
    admission: AdmissionControl,
    streams: Vec<StreamRt>,
    stream_pos: StreamLookup,
    vms: Vec<Vm>,
    view_buf: Vec<VmQueueState>,
    tracker: DmrTracker,
    type_mean_exec: Vec<f64>,
    remedial_type: usize,
    last_remedial: f64,
    arrivals_pending: usize,
    total_gops: usize,
    report: MetricsReport,
    early_sum: [f64; EARLY_GOPS],
    early_n: [usize; EARLY_GOPS],
}

impl<'a> Engine<'a> {
    pub(super) fn new(
        workload: &'a Workload,
        catalog: &'a VmTypeCatalog,
        cfg: &'a SimConfig,
        heuristic: Arc<dyn MappingHeuristic>,
        seed: u64,
    ) -> Result<Self, SimError> {
        let nt = catalog.len();
        let hourly = catalog.hourly_costs();
        let mut streams = Vec::with_capacity(workload.streams.len());
        let mut positions = Vec::with_capacity(workload.streams.len());
        for (pos, s) in workload.streams.iter().enumerate() {
            let n = s.gops.len();
            let mut wc = Vec::with_capacity(n * nt);
            let mut mean_exec = Vec::with_capacity(n);
            let mut gop_type = Vec::with_capacity(n);
            for g in &s.gops {
                let mut means = Vec::with_capacity(nt);
                for t in 0..nt {
                    let e = workload.etc.get(g.id, t)?;
                    wc.push(e.worst_case());
                    means.push(e.mean);
                }
                mean_exec.push(means.iter().sum::<f64>() / nt as f64);
                let scores = suitability_scores(&means, &hourly, cfg.provisioner.k_suit);
                gop_type.push(argmax_suitability(&scores, &hourly));
            }
            streams.push(StreamRt {
                arrival: s.request_arrival_time,
                psi: None,
                deadlines: s.gops.iter().map(|g| g.relative_deadline).collect(),
                wc,
                mean_exec,
                gop_type,
                utility: Vec::new(),
                dispatches: vec![0; n],
                window: OutputWindow::default(),
            });
            positions.push((s.id, pos));
        }
        let stream_pos = StreamLookup::new(positions);
        let remedial_type = catalog.position(&cfg.provisioner.remedial_type).unwrap_or(0);
        Ok(Engine {
            workload,
            catalog,
            cfg,
            heuristic,
            rng: ChaCha8Rng::seed_from_u64(seed),
            events: EventQueue::default(),
            now: 0.0,
            admission: AdmissionControl::new(cfg.utility),
            streams,
            stream_pos,
            vms: Vec::new(),
            view_buf: Vec::new(),
            tracker: DmrTracker::new(cfg.provisioner.period, nt),
            type_mean_exec: workload.etc.mean_per_type(),
            remedial_type,
            last_remedial: f64::NEG_INFINITY,
            arrivals_pending: workload.streams.len(),
            total_gops: workload.total_gops(),
            report: MetricsReport::default(),
            early_sum: [0.0; EARLY_GOPS],
            early_n: [0; EARLY_GOPS],
        })
    }

    fn dynamic(&self) -> bool {
        self.cfg.mode.is_dynamic()
    }

    fn done(&self) -> bool {
        self.arrivals_pending == 0 && self.admission.delivered() == self.total_gops
    }

    pub(super) fn run(mut self) -> Result<MetricsReport, SimError> {
        self.report.num_streams = self.workload.streams.len();
        self.report.total_gops = self.total_gops;
        if self.workload.streams.is_empty() {
            self.report.early_gop_completion = vec![None; EARLY_GOPS];
            return Ok(self.report);
        }
        let counts = match &self.cfg.mode {
            ProvisioningMode::Static { counts } => counts,
            ProvisioningMode::Dynamic { initial } => initial,
        };
        for (type_id, &n) in counts {
            let t = self.catalog.position(type_id).expect("validated type");
            for _ in 0..n {
                self.allocate(t, AllocationCause::Initial);
            }
        }
        for (pos, s) in self.workload.streams.iter().enumerate() {
            self.events
                .push(s.request_arrival_time, EventKind::StreamArrival { stream: pos });
        }
        if self.dynamic() {
            self.events.push(self.cfg.provisioner.period, EventKind::ProvisioningTick);
        }

        while let Some(ev) = self.events.pop() {
            debug_assert!(ev.time >= self.now, "event time went backwards");
            self.now = ev.time;
            self.report.events_processed += 1;
            if self.now > self.cfg.max_sim_time {
                return Err(SimError::Stalled {
                    time: self.now,
                    pending: self.total_gops - self.admission.delivered(),
                });
            }
            match ev.kind {
                EventKind::StreamArrival { stream } => self.on_arrival(stream)?,
                EventKind::GopCompletion { vm, gop, failed } => self.on_completion(vm, gop, failed)?,
                EventKind::CycleBoundary { vm } => self.on_cycle_boundary(vm)?,
                EventKind::MergerTimeout { gop, dispatch } => self.on_timeout(gop, dispatch)?,
                EventKind::ProvisioningTick => self.on_tick()?,
            }
            if self.done() {
                break;
            }
        }
        if !self.done() {
            return Err(SimError::Stalled {
                time: self.now,
                pending: self.total_gops - self.admission.delivered(),
            });
        }
        Ok(self.finish())
    }

    fn finish(mut self) -> MetricsReport {
        let r = &mut self.report;
        r.makespan = self.now;
        r.delivered_gops = self.admission.delivered();
        r.startup_delays = self
            .streams
            .iter()
            .map(|s| s.psi.map(|p| p - s.arrival))
            .collect();
        let delays: Vec<f64> = r.startup_delays.iter().flatten().copied().collect();
        r.avg_startup_delay = if delays.is_empty() {
            0.0
        } else {
            delays.iter().sum::<f64>() / delays.len() as f64
        };
        r.deadline_miss_rate = if r.deadline_checked == 0 {
            0.0
        } else {
            r.deadline_misses as f64 / r.deadline_checked as f64
        };
        r.early_gop_completion = (0..EARLY_GOPS)
            .map(|j| (self.early_n[j] > 0).then(|| self.early_sum[j] / self.early_n[j] as f64))
            .collect();
        r.vm_bills = self
            .vms
            .iter()
            .enumerate()
            .map(|(id, v)| VmBill {
                vm_id: id,
                type_id: self.catalog.get(v.type_idx).expect("valid type").type_id.clone(),
                hourly_cost: v.hourly,
                allocated_at: v.allocated_at,
                released_at: v.released_at,
                cycles_paid: v.cycles_paid,
                cost: v.cycles_paid as f64 * v.hourly,
            })
            .collect();
        r.total_cost = r.vm_bills.iter().map(|b| b.cost).sum();
        self.report
    }

    fn allocate(&mut self, type_idx: usize, cause: AllocationCause) {
        let vm_id = self.vms.len();
        let desc = self.catalog.get(type_idx).expect("valid type");
        self.vms.push(Vm {
            type_idx,
            hourly: desc.hourly_cost,
            allocated_at: self.now,
            cycles_paid: 1,
            marked: false,
            released_at: None,
            executing: None,
            queue: VecDeque::new(),
            busy: VecDeque::new(),
        });
        self.events.push(
            self.now + self.cfg.cycle_seconds,
            EventKind::CycleBoundary { vm: vm_id },
        );
        self.report.timeline.push(ProvisioningRecord::Allocate {
            time: self.now,
            vm_id,
            type_id: desc.type_id.clone(),
            cause,
        });
        let alive = self.vms.iter().filter(|v| v.alive()).count();
        self.report.peak_vms = self.report.peak_vms.max(alive);
    }

    fn stream_of(&self, gop: GopId) -> usize {
        self.stream_pos.get(gop.stream)
    }

    /// Absolute deadline, using the provisional playback start before the
    /// stream's first delivery.
    fn deadline(&self, s: &StreamRt, index: u32) -> f64 {
        let psi = s.psi.unwrap_or(s.arrival + self.cfg.startup_allowance);
        s.deadlines[index as usize] + psi
    }

    fn on_arrival(&mut self, pos: usize) -> Result<(), SimError> {
        self.arrivals_pending -= 1;
        let tasks = self.admission.admit_stream(&self.workload.streams[pos], self.now)?;
        self.streams[pos].utility = tasks.iter().map(|t| t.utility).collect();
        self.tracker.record_arrival(self.now);
        self.schedule()
    }

    fn start_next(&mut self, vm_id: usize) -> Result<(), SimError> {
        let vm = &mut self.vms[vm_id];
        if vm.executing.is_some() {
            return Ok(());
        }
        let Some((gop, tau)) = vm.queue.pop_front() else {
            return Ok(());
        };
        let est = self.workload.etc.get(gop, vm.type_idx)?;
        let actual = sample_estimate(est, &mut self.rng);
        let failed = self.cfg.failure_probability > 0.0 && self.rng.random::<f64>() < self.cfg.failure_probability;
        let end = self.now + actual;
        vm.executing = Some(Running {
            gop,
            start: self.now,
            tau,
        });
        vm.busy.push_back((self.now, end));
        self.events
            .push(end, EventKind::GopCompletion { vm: vm_id, gop, failed });
        Ok(())
    }

    fn on_completion(&mut self, vm_id: usize, gop: GopId, failed: bool) -> Result<(), SimError> {
        self.vms[vm_id].executing = None;
        if failed {
            self.report.failed_executions += 1;
        } else if self.admission.deliver(gop)? {
            self.record_delivery(gop);
        } else {
            self.report.duplicate_deliveries += 1;
        }
        self.start_next(vm_id)?;
        self.schedule()
    }

    fn record_delivery(&mut self, gop: GopId) {
        let pos = self.stream_of(gop);
        let now = self.now;
        let j = gop.index;
        let s = &mut self.streams[pos];
        if j == 0 {
            s.psi = Some(now);
        } else {
            // before the first delivery, playback has not started and
            // every later deadline is still ahead
            let missed = s.psi.is_some_and(|p| now > s.deadlines[j as usize] + p);
            self.report.deadline_checked += 1;
            if missed {
                self.report.deadline_misses += 1;
            }
            self.tracker.record_completion(now, s.gop_type[j as usize], missed);
        }
        if (j as usize) < EARLY_GOPS {
            self.early_sum[j as usize] += now - s.arrival;
            self.early_n[j as usize] += 1;
        }
        let released = s.window.deliver(j);
        let overdue = s.window.take_overdue_head();
        if self.cfg.record_releases {
            self.report
                .releases
                .extend(released.into_iter().map(|i| GopId { stream: gop.stream, index: i }));
        }
        if let Some(h) = overdue {
            self.resubmit(GopId { stream: gop.stream, index: h });
        }
    }

    fn resubmit(&mut self, gop: GopId) {
        if self.admission.state(gop) == Some(GopState::Dispatched) && self.admission.resubmit(gop).is_ok() {
            self.report.resubmissions += 1;
        }
    }

    fn on_timeout(&mut self, gop: GopId, dispatch: u32) -> Result<(), SimError> {
        let pos = self.stream_of(gop);
        let s = &mut self.streams[pos];
        if s.dispatches[gop.index as usize] != dispatch
            || self.admission.state(gop) != Some(GopState::Dispatched)
        {
            return Ok(());
        }
        if s.window.head() == gop.index {
            self.resubmit(gop);
            self.schedule()
        } else {
            s.window.mark_overdue(gop.index);
            Ok(())
        }
    }

    fn on_cycle_boundary(&mut self, vm_id: usize) -> Result<(), SimError> {
        let cycle = self.cfg.cycle_seconds;
        let vm = &mut self.vms[vm_id];
        if !vm.alive() {
            return Ok(());
        }
        if vm.marked && vm.idle() {
            vm.released_at = Some(self.now);
            self.report
                .timeline
                .push(ProvisioningRecord::Terminate { time: self.now, vm_id });
        } else {
            vm.cycles_paid += 1;
            let next = vm.cycle_end(cycle);
            self.report.timeline.push(ProvisioningRecord::Charge {
                time: self.now,
                vm_id,
                cycle: vm.cycles_paid,
            });
            self.events.push(next, EventKind::CycleBoundary { vm: vm_id });
        }
        if self.dynamic() {
            self.deallocate(DeallocTrigger::CycleBoundary);
        }
        self.schedule()
    }

    fn gamma(&mut self) -> f64 {
        let measured = self.tracker.gamma(self.now);
        self.cfg.gamma_override.unwrap_or(measured)
    }

    fn on_tick(&mut self) -> Result<(), SimError> {
        let gamma = self.gamma();
        self.report
            .timeline
            .push(ProvisioningRecord::Tick { time: self.now, gamma });
        if gamma >= self.cfg.qos.beta {
            self.periodic_allocation(gamma);
        } else if gamma <= self.cfg.qos.alpha {
            self.deallocate(DeallocTrigger::Tick);
        }
        self.events
            .push(self.now + self.cfg.provisioner.period, EventKind::ProvisioningTick);
        self.schedule()
    }

    fn periodic_allocation(&mut self, gamma: f64) {
        let nt = self.catalog.len();
        let p = &self.cfg.provisioner;
        let mut phi = vec![0.0; nt];
        let queue = self.admission.batch_queue();
        for gop in queue.iter() {
            let s = &self.streams[self.stream_pos.get(gop.stream)];
            phi[s.gop_type[gop.index as usize]] += 1.0;
        }
        let queued = queue.len().max(1) as f64;
        phi.iter_mut().for_each(|f| *f /= queued);

        let (now, window) = (self.now, p.period);
        let mut rho_min = vec![1.0f64; nt];
        for vm in self.vms.iter_mut().filter(|v| v.alive() && !v.marked) {
            let rho = vm.utilization(now, window);
            rho_min[vm.type_idx] = rho_min[vm.type_idx].min(rho);
        }
        let arrivals = self.tracker.arrivals_in_window(now) as f64;
        let inputs = AllocationInputs {
            gamma,
            arrival_rate: arrivals / p.period * p.arrival_rate_unit,
            sigma: self.tracker.sigma(now),
            phi,
            rho_min,
        };
        for (t, n) in allocation_policy(&inputs, &self.cfg.provisioner, &self.cfg.qos) {
            for _ in 0..n {
                self.allocate(t, AllocationCause::Periodic);
            }
        }
    }

    fn deallocate(&mut self, trigger: DeallocTrigger) {
        let gamma = self.gamma();
        let (now, window, cycle) = (self.now, self.cfg.provisioner.period, self.cfg.cycle_seconds);
        let type_mean = &self.type_mean_exec;
        let snapshots: Vec<VmSnapshot> = self
            .vms
            .iter_mut()
            .enumerate()
            .filter(|(_, v)| v.alive() && !v.marked)
            .map(|(vm_id, v)| VmSnapshot {
                vm_id,
                type_idx: v.type_idx,
                utilization: v.utilization(now, window),
                mean_exec: type_mean[v.type_idx],
                remaining_cycle: v.cycle_end(cycle) - now,
            })
            .collect();
        let decision = deallocation_policy(
            gamma,
            &snapshots,
            self.catalog.len(),
            &self.cfg.provisioner,
            &self.cfg.qos,
        );
        match decision {
            DeallocationDecision::Mark { vm_id, eta } => {
                self.vms[vm_id].marked = true;
                let utilization = snapshots
                    .iter()
                    .find(|s| s.vm_id == vm_id)
                    .map_or(0.0, |s| s.utilization);
                self.report.timeline.push(ProvisioningRecord::Mark {
                    time: now,
                    vm_id,
                    utilization,
                    eta,
                    trigger,
                });
            }
            DeallocationDecision::Retain { vm_id, eta } => {
                self.report.timeline.push(ProvisioningRecord::Retain {
                    time: now,
                    vm_id,
                    eta,
                    trigger,
                });
            }
            DeallocationDecision::NoAction => {}
        }
        if self.cfg.audit_deallocation {
            self.report.dealloc_audit.push(DeallocAudit {
                time: now,
                trigger,
                gamma,
                snapshots,
                decision,
            });
        }
    }

    /// Count virtual-queue GOPs that no unmarked VM could finish by their
    /// deadline even if it took them next, and order remedial VMs for them.
    fn remedial(&mut self) {
        let p = &self.cfg.provisioner;
        if !self.dynamic() || !p.remedial || self.now - self.last_remedial < p.remedial_interval {
            return;
        }
        self.last_remedial = self.now;
        let nt = self.catalog.len();
        let now = self.now;
        let cycle = self.cfg.cycle_seconds;
        let mut views = std::mem::take(&mut self.view_buf);
        fill_views(&self.vms, &mut views, now, cycle, false);
        let vq = self.admission.batch_queue().virtual_queue_ids();
        let at_risk = vq
            .iter()
            .filter(|e| {
                let s = &self.streams[self.stream_pos.get(e.0.stream)];
                let j = e.0.index as usize;
                let deadline = self.deadline(s, e.0.index);
                let exec = &s.wc[j * nt..(j + 1) * nt];
                !views.iter().any(|v| v.estimate(now, exec[v.type_idx]) <= deadline)
            })
            .count();
        self.view_buf = views;
        let n = remedial_policy(at_risk, p, &self.cfg.qos);
        for _ in 0..n {
            self.allocate(self.remedial_type, AllocationCause::Remedial);
        }
    }

    /// Map virtual-queue GOPs until no slot is free or nothing is pending.
    fn schedule(&mut self) -> Result<(), SimError> {
        if self.admission.pending() == 0 {
            return Ok(());
        }
        self.remedial();
        let nt = self.catalog.len();
        let now = self.now;
        let cycle = self.cfg.cycle_seconds;
        loop {
            if self.admission.pending() == 0 || !self.vms.iter().any(Vm::has_slot) {
                return Ok(());
            }
            let vq = self.admission.batch_queue().virtual_queue_ids();
            let mut views = std::mem::take(&mut self.view_buf);
            fill_views(&self.vms, &mut views, now, cycle, true);
            let assignments = {
                let candidates: Vec<Candidate<'_>> = vq
                    .iter()
                    .map(|&(gop, resubmitted)| {
                        let s = &self.streams[self.stream_pos.get(gop.stream)];
                        let j = gop.index as usize;
                        Candidate {
                            gop,
                            utility: if resubmitted { RESUBMITTED_UTILITY } else { s.utility[j] },
                            deadline: self.deadline(s, gop.index),
                            exec: &s.wc[j * nt..(j + 1) * nt],
                        }
                    })
                    .collect();
                self.heuristic.map(&candidates, &mut views, now)
            };
            self.view_buf = views;
            if assignments.is_empty() {
                return Ok(());
            }
            for a in assignments {
                self.dispatch(a.gop, a.vm_id, a.estimated_completion)?;
            }
        }
    }

    fn dispatch(&mut self, gop: GopId, vm_id: usize, estimate: f64) -> Result<(), SimError> {
        self.admission.dispatch(gop)?;
        let pos = self.stream_of(gop);
        let nt = self.catalog.len();
        let j = gop.index as usize;
        let s = &mut self.streams[pos];
        s.dispatches[j] += 1;
        let dispatch = s.dispatches[j];
        let grace = self.cfg.merger_grace_factor * s.mean_exec[j];
        let deadline = self.deadline(&self.streams[pos], gop.index);
        let vm = &mut self.vms[vm_id];
        let tau = self.streams[pos].wc[j * nt + vm.type_idx];
        vm.queue.push_back((gop, tau));
        self.start_next(vm_id)?;
        self.events.push(
            deadline.max(estimate) + grace,
            EventKind::MergerTimeout { gop, dispatch },
        );
        Ok(())
    }
}
