use std::collections::BTreeSet;

/// Per-stream reorder buffer. GOPs may finish out of order; they are
/// released strictly by index.
#[derive(Debug, Clone, Default)]
pub struct OutputWindow {
    next: u32,
    held: BTreeSet<u32>,
    /// Indices whose watchdog fired while an earlier GOP blocked the head.
    overdue: BTreeSet<u32>,
}

impl OutputWindow {
    /// Index the window is waiting for.
    pub fn head(&self) -> u32 {
        self.next
    }

    /// Accept a delivered index and return the indices released in order.
    pub fn deliver(&mut self, index: u32) -> Vec<u32> {
        if index < self.next || !self.held.insert(index) {
            return Vec::new();
        }
        let mut out = Vec::new();
        while self.held.remove(&self.next) {
            self.overdue.remove(&self.next);
            out.push(self.next);
            self.next += 1;
        }
        out
    }

    pub fn is_delivered(&self, index: u32) -> bool {
        index < self.next || self.held.contains(&index)
    }

    /// Remember a timed-out index that is not yet at the head.
    pub fn mark_overdue(&mut self, index: u32) {
        if !self.is_delivered(index) {
            self.overdue.insert(index);
        }
    }

    /// Take the head index if it timed out earlier and is still missing.
    pub fn take_overdue_head(&mut self) -> Option<u32> {
        if self.overdue.remove(&self.next) {
            Some(self.next)
        } else {
            None
        }
    }
}
