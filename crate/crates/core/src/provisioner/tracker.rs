use std::collections::VecDeque;

/// Sliding-window deadline miss statistics and stream arrival counts.
///
/// Entries older than `window` seconds before the query time are dropped;
/// the window is `(now - window, now]`.
#[derive(Debug, Clone)]
pub struct DmrTracker {
    window: f64,
    num_types: usize,
    completions: VecDeque<(f64, usize, bool)>,
    misses: Vec<usize>,
    total_misses: usize,
    arrivals: VecDeque<f64>,
}

impl DmrTracker {
    pub fn new(window: f64, num_types: usize) -> Self {
        DmrTracker {
            window,
            num_types,
            completions: VecDeque::new(),
            misses: vec![0; num_types],
            total_misses: 0,
            arrivals: VecDeque::new(),
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Record a deadline-checked completion of a GOP of type `gop_type`.
    pub fn record_completion(&mut self, now: f64, gop_type: usize, missed: bool) {
        self.completions.push_back((now, gop_type, missed));
        if missed {
            self.misses[gop_type] += 1;
            self.total_misses += 1;
        }
    }

    pub fn record_arrival(&mut self, now: f64) {
        self.arrivals.push_back(now);
    }

    fn prune(&mut self, now: f64) {
        let cutoff = now - self.window;
        while let Some(&(t, ty, missed)) = self.completions.front() {
            if t > cutoff {
                break;
            }
            if missed {
                self.misses[ty] -= 1;
                self.total_misses -= 1;
            }
            self.completions.pop_front();
        }
        while self.arrivals.front().is_some_and(|&t| t <= cutoff) {
            self.arrivals.pop_front();
        }
    }

    /// Miss rate over the window; zero when nothing completed.
    pub fn gamma(&mut self, now: f64) -> f64 {
        self.prune(now);
        if self.completions.is_empty() {
            0.0
        } else {
            self.total_misses as f64 / self.completions.len() as f64
        }
    }

    /// Share of windowed misses attributed to each GOP type (sums to 1 when
    /// any miss occurred, all zero otherwise).
    pub fn sigma(&mut self, now: f64) -> Vec<f64> {
        self.prune(now);
        if self.total_misses == 0 {
            return vec![0.0; self.num_types];
        }
        let total = self.total_misses as f64;
        self.misses.iter().map(|&m| m as f64 / total).collect()
    }

    pub fn arrivals_in_window(&mut self, now: f64) -> usize {
        self.prune(now);
        self.arrivals.len()
    }
}
