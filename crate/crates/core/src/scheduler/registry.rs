use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Assignment, Candidate, Objective, TwoPhase, UtilityBased, VmQueueState};

/// A batch-mode mapping heuristic. `map` commits assignments into `vms` in
/// order and returns them; it never overfills a local queue.
pub trait MappingHeuristic: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn map(&self, queue: &[Candidate<'_>], vms: &mut [VmQueueState], now: f64) -> Vec<Assignment>;
}

/// The built-in heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HeuristicKind {
    MM,
    MSD,
    MMU,
    MMUT,
    MSDUT,
    MMUUT,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 6] = [
        HeuristicKind::MM,
        HeuristicKind::MSD,
        HeuristicKind::MMU,
        HeuristicKind::MMUT,
        HeuristicKind::MSDUT,
        HeuristicKind::MMUUT,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeuristicKind::MM => "MM",
            HeuristicKind::MSD => "MSD",
            HeuristicKind::MMU => "MMU",
            HeuristicKind::MMUT => "MMUT",
            HeuristicKind::MSDUT => "MSDUT",
            HeuristicKind::MMUUT => "MMUUT",
        }
    }

    pub fn objective(self) -> Objective {
        match self {
            HeuristicKind::MM | HeuristicKind::MMUT => Objective::MinCompletion,
            HeuristicKind::MSD | HeuristicKind::MSDUT => Objective::SoonestDeadline,
            HeuristicKind::MMU | HeuristicKind::MMUUT => Objective::MaxUrgency,
        }
    }

    pub fn is_utility_based(self) -> bool {
        matches!(
            self,
            HeuristicKind::MMUT | HeuristicKind::MSDUT | HeuristicKind::MMUUT
        )
    }

    fn build(self) -> Arc<dyn MappingHeuristic> {
        let name = self.as_str();
        let objective = self.objective();
        if self.is_utility_based() {
            Arc::new(UtilityBased { name, objective })
        } else {
            Arc::new(TwoPhase { name, objective })
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownHeuristic(pub String);

impl fmt::Display for UnknownHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = HeuristicKind::ALL.iter().map(|k| k.as_str()).collect();
        write!(f, "unknown heuristic `{}` (expected one of {})", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownHeuristic {}

impl FromStr for HeuristicKind {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownHeuristic(s.to_string()))
    }
}

/// Name-keyed heuristic lookup.
#[derive(Debug, Clone, Default)]
pub struct HeuristicRegistry {
    entries: BTreeMap<String, Arc<dyn MappingHeuristic>>,
}

impl HeuristicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with the six built-in heuristics.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        for k in HeuristicKind::ALL {
            r.register(k.build());
        }
        r
    }

    /// Add or replace a heuristic under its own name.
    pub fn register(&mut self, h: Arc<dyn MappingHeuristic>) {
        self.entries.insert(h.name().to_string(), h);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MappingHeuristic>, UnknownHeuristic> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownHeuristic(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
