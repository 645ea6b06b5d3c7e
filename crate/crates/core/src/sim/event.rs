use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::workload::GopId;

/// Event kinds in tie-break order: at equal times a lower rank runs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    CycleBoundary { vm: usize },
    GopCompletion { vm: usize, gop: GopId, failed: bool },
    StreamArrival { stream: usize },
    MergerTimeout { gop: GopId, dispatch: u32 },
    ProvisioningTick,
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::CycleBoundary { .. } => 0,
            EventKind::GopCompletion { .. } => 1,
            EventKind::StreamArrival { .. } => 2,
            EventKind::MergerTimeout { .. } => 3,
            EventKind::ProvisioningTick => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so the max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-ordered event queue with insertion sequence numbers.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
