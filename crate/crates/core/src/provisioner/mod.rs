//! VM provisioning decisions.
//!
//! All functions are pure over snapshots; the simulation loop owns state and
//! calls them at provisioning ticks, cycle boundaries and queue refreshes.

mod tracker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::{EtcMatrix, GopId, VmTypeCatalog, WorkloadError};

pub use tracker::DmrTracker;

#[derive(Debug, Error)]
pub enum ProvisionerError {
    #[error("invalid provisioner parameters: {0}")]
    Params(String),
    #[error("heterogeneity is undefined for an empty cluster")]
    EmptyCluster,
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// Target band for the deadline miss rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosBand {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for QosBand {
    fn default() -> Self {
        QosBand {
            alpha: 0.05,
            beta: 0.1,
        }
    }
}

impl QosBand {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ProvisionerError> {
        let q = QosBand { alpha, beta };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), ProvisionerError> {
        if !(0.0 <= self.alpha && self.alpha < self.beta && self.beta <= 1.0) {
            return Err(ProvisionerError::Params(format!(
                "QoS band needs 0 <= alpha < beta <= 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProvisionerParams {
    /// Weight of performance against cost in suitability.
    pub k_suit: f64,
    /// Weight of current misses against queued demand.
    pub k_demand: f64,
    pub omega_th: f64,
    pub rho_th: f64,
    pub eta_th: f64,
    /// Remedial aggressiveness; larger is more conservative.
    pub theta: f64,
    /// Seconds between periodic provisioning events.
    pub period: f64,
    /// Stream arrivals observed over the last period are expressed per this
    /// many seconds to form the allocation rate `r`.
    pub arrival_rate_unit: f64,
    pub remedial_type: String,
    pub remedial: bool,
    /// Minimum simulated seconds between two remedial evaluations.
    pub remedial_interval: f64,
    /// Deallocation never marks below this many unmarked VMs.
    pub min_vms: usize,
}

impl Default for ProvisionerParams {
    fn default() -> Self {
        ProvisionerParams {
            k_suit: 0.5,
            k_demand: 0.3,
            omega_th: 0.25,
            rho_th: 0.70,
            eta_th: 0.4,
            theta: 10.0,
            period: 60.0,
            arrival_rate_unit: 10.0,
            remedial_type: "c4.xlarge".to_string(),
            remedial: true,
            remedial_interval: 1.0,
            min_vms: 1,
        }
    }
}

impl ProvisionerParams {
    pub fn validate(&self) -> Result<(), ProvisionerError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ProvisionerError::Params(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("k_suit", self.k_suit)?;
        unit("k_demand", self.k_demand)?;
        unit("omega_th", self.omega_th)?;
        unit("rho_th", self.rho_th)?;
        unit("eta_th", self.eta_th)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ProvisionerError::Params(format!("{name} must be positive, got {v}")))
            }
        };
        positive("theta", self.theta)?;
        positive("period", self.period)?;
        positive("arrival_rate_unit", self.arrival_rate_unit)?;
        if !(self.remedial_interval >= 0.0) {
            return Err(ProvisionerError::Params("remedial_interval must be non-negative".into()));
        }
        Ok(())
    }
}

fn normalized(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (max - v) / (max - min)).collect()
}

/// Suitability of every type given per-type execution times and hourly
/// prices. GOP cost on type `i` is `t_i * hourly_i / 3600`.
pub fn suitability_scores(exec: &[f64], hourly: &[f64], k_suit: f64) -> Vec<f64> {
    let cost: Vec<f64> = exec.iter().zip(hourly).map(|(t, h)| t * h / 3600.0).collect();
    let t = normalized(exec);
    let c = normalized(&cost);
    t.iter()
        .zip(&c)
        .map(|(t, c)| (k_suit * t + (1.0 - k_suit) * c).clamp(0.0, 1.0))
        .collect()
}

fn mean_row(etc: &EtcMatrix, gop: GopId) -> Result<Vec<f64>, WorkloadError> {
    (0..etc.num_types()).map(|i| etc.get(gop, i).map(|e| e.mean)).collect()
}

pub fn suitability(
    gop: GopId,
    type_idx: usize,
    etc: &EtcMatrix,
    catalog: &VmTypeCatalog,
    k_suit: f64,
) -> Result<f64, ProvisionerError> {
    let scores = suitability_scores(&mean_row(etc, gop)?, &catalog.hourly_costs(), k_suit);
    scores
        .get(type_idx)
        .copied()
        .ok_or(ProvisionerError::Workload(WorkloadError::Lookup { gop, type_idx }))
}

/// Index of the highest score; ties go to the cheapest type, then the lower index.
pub fn argmax_suitability(scores: &[f64], hourly: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && hourly[i] < hourly[best]);
        if better {
            best = i;
        }
    }
    best
}

/// The GOP type: catalog index of the most suitable VM type.
pub fn gop_type(
    gop: GopId,
    etc: &EtcMatrix,
    catalog: &VmTypeCatalog,
    k_suit: f64,
) -> Result<usize, ProvisionerError> {
    let hourly = catalog.hourly_costs();
    let scores = suitability_scores(&mean_row(etc, gop)?, &hourly, k_suit);
    Ok(argmax_suitability(&scores, &hourly))
}

pub fn demand(sigma: f64, phi: f64, k_demand: f64) -> f64 {
    k_demand * sigma + (1.0 - k_demand) * phi
}

/// Inputs to one periodic allocation decision, indexed by catalog type.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInputs {
    /// Deadline miss rate over the recent window.
    pub gamma: f64,
    pub arrival_rate: f64,
    /// Share of recent misses per GOP type.
    pub sigma: Vec<f64>,
    /// Share of batch-queue GOPs per GOP type.
    pub phi: Vec<f64>,
    /// Minimum utilization over unmarked VMs of each type.
    pub rho_min: Vec<f64>,
}

/// Periodic allocation: `(type index, count)` for every type to grow.
pub fn allocation_policy(
    inputs: &AllocationInputs,
    params: &ProvisionerParams,
    qos: &QosBand,
) -> Vec<(usize, usize)> {
    if inputs.gamma < qos.beta {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..inputs.phi.len() {
        let omega = demand(inputs.sigma[i], inputs.phi[i], params.k_demand);
        if omega >= params.omega_th && inputs.rho_min[i] >= params.rho_th {
            let n = (inputs.arrival_rate * omega / qos.beta).floor() as usize;
            if n > 0 {
                out.push((i, n));
            }
        }
    }
    out
}

/// VM counts per catalog type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterComposition {
    pub counts: Vec<usize>,
}

impl ClusterComposition {
    pub fn new(counts: Vec<usize>) -> Self {
        ClusterComposition { counts }
    }

    pub fn from_types(types: impl IntoIterator<Item = usize>, catalog_size: usize) -> Self {
        let mut counts = vec![0; catalog_size];
        for t in types {
            counts[t] += 1;
        }
        ClusterComposition { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn proportions(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Normalized Shannon entropy of the type mix, `H / ln(catalog_size)`.
pub fn heterogeneity(comp: &ClusterComposition, catalog_size: usize) -> Result<f64, ProvisionerError> {
    if comp.total() == 0 {
        return Err(ProvisionerError::EmptyCluster);
    }
    if catalog_size < 2 {
        return Ok(0.0);
    }
    let h: f64 = comp
        .proportions()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok((h / (catalog_size as f64).ln()).clamp(0.0, 1.0))
}

/// What the deallocation policy knows about one unmarked VM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmSnapshot {
    pub vm_id: usize,
    pub type_idx: usize,
    pub utilization: f64,
    /// Mean execution time of the VM's type over the workload; higher is weaker.
    pub mean_exec: f64,
    /// Seconds to the end of the VM's current charging cycle.
    pub remaining_cycle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum DeallocationDecision {
    /// Miss rate above the lower threshold, or nothing to release.
    NoAction,
    /// Candidate kept because the cluster is diverse and the VM is busy.
    Retain { vm_id: usize, eta: f64 },
    Mark { vm_id: usize, eta: f64 },
}

impl DeallocationDecision {
    pub fn marked(&self) -> Option<usize> {
        match self {
            DeallocationDecision::Mark { vm_id, .. } => Some(*vm_id),
            _ => None,
        }
    }
}

/// The VM deallocation would consider: lowest utilization, then least
/// powerful, then least time left in the cycle, then lowest id.
pub fn deallocation_candidate(vms: &[VmSnapshot]) -> Option<&VmSnapshot> {
    vms.iter().min_by(|a, b| {
        a.utilization
            .total_cmp(&b.utilization)
            .then(b.mean_exec.total_cmp(&a.mean_exec))
            .then(a.remaining_cycle.total_cmp(&b.remaining_cycle))
            .then(a.vm_id.cmp(&b.vm_id))
    })
}

/// Choose at most one VM to mark for release at its cycle end.
pub fn deallocation_policy(
    gamma: f64,
    vms: &[VmSnapshot],
    catalog_size: usize,
    params: &ProvisionerParams,
    qos: &QosBand,
) -> DeallocationDecision {
    if gamma > qos.alpha || vms.len() <= params.min_vms {
        return DeallocationDecision::NoAction;
    }
    let Some(cand) = deallocation_candidate(vms) else {
        return DeallocationDecision::NoAction;
    };
    let comp = ClusterComposition::from_types(vms.iter().map(|v| v.type_idx), catalog_size);
    let eta = heterogeneity(&comp, catalog_size).unwrap_or(0.0);
    if eta >= params.eta_th && cand.utilization >= params.rho_th {
        DeallocationDecision::Retain { vm_id: cand.vm_id, eta }
    } else {
        DeallocationDecision::Mark { vm_id: cand.vm_id, eta }
    }
}

/// Number of remedial VMs for a virtual queue of `queue_size` entries.
pub fn remedial_policy(queue_size: usize, params: &ProvisionerParams, qos: &QosBand) -> usize {
    (queue_size as f64 / (params.theta * qos.beta)).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn suitability_worked_example() {
        // t in {10, 20, 30}; hourly chosen so costs are {0.5, 0.2, 0.1} / 3600 * t
        let exec = [10.0, 20.0, 30.0];
        let hourly = [0.5 * 3600.0 / 10.0, 0.2 * 3600.0 / 20.0, 0.1 * 3600.0 / 30.0];
        let s = suitability_scores(&exec, &hourly, 0.4);
        assert_abs_diff_eq!(s[1], 0.4 * 0.5 + 0.6 * 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(s[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn suitability_extremes() {
        let s = suitability_scores(&[1.0, 2.0], &[1.0, 2.0], 0.3);
        assert_eq!(s, vec![1.0, 0.0]);
        // degenerate axes score 1
        let s = suitability_scores(&[5.0, 5.0], &[0.2, 0.2], 0.5);
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn gop_type_ties_go_cheapest() {
        assert_eq!(argmax_suitability(&[0.9, 0.3, 0.5, 0.2], &[0.65, 0.2, 0.33, 0.15]), 0);
        assert_eq!(argmax_suitability(&[0.5; 4], &[0.65, 0.2, 0.33, 0.15]), 3);
    }

    #[test]
    fn gop_type_from_etc() {
        use crate::workload::ExecEstimate;
        let cat = VmTypeCatalog::ec2_default();
        let g = GopId::new(0, 0);
        let mut etc = EtcMatrix::new(4);
        let row = [3.0, 1.0, 2.0, 4.0].map(|m| ExecEstimate::new(m, 0.1).unwrap());
        etc.insert_row(g, row.to_vec()).unwrap();
        // c4.xlarge is fastest and cheapest per GOP
        for k in [0.0, 0.5, 1.0] {
            assert_eq!(gop_type(g, &etc, &cat, k).unwrap(), 1);
            assert_eq!(suitability(g, 1, &etc, &cat, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn demand_values() {
        assert_eq!(demand(0.0, 0.0, 0.3), 0.0);
        assert_abs_diff_eq!(demand(0.2, 0.5, 0.3), 0.41, epsilon = 1e-15);
        assert_eq!(demand(0.37, 0.9, 1.0), 0.37);
    }

    fn inputs(gamma: f64, omega_phi: f64, rho: f64, r: f64) -> AllocationInputs {
        AllocationInputs {
            gamma,
            arrival_rate: r,
            sigma: vec![0.2],
            phi: vec![omega_phi],
            rho_min: vec![rho],
        }
    }

    #[test]
    fn allocation_examples() {
        let p = ProvisionerParams::default();
        let q = QosBand::default();
        assert!(allocation_policy(&inputs(0.04, 0.5, 0.9, 2.0), &p, &q).is_empty());
        assert_eq!(allocation_policy(&inputs(0.15, 0.5, 0.9, 2.0), &p, &q), vec![(0, 8)]);
        assert!(allocation_policy(&inputs(0.15, 0.5, 0.5, 2.0), &p, &q).is_empty());
    }

    #[test]
    fn heterogeneity_examples() {
        let h = heterogeneity(&ClusterComposition::new(vec![3, 3, 3, 3]), 4).unwrap();
        assert_abs_diff_eq!(h, 1.0, epsilon = 1e-12);
        assert_eq!(heterogeneity(&ClusterComposition::new(vec![0, 7, 0, 0]), 4).unwrap(), 0.0);
        let h = heterogeneity(&ClusterComposition::new(vec![6, 2, 0, 0]), 4).unwrap();
        assert_abs_diff_eq!(h, 0.405639, epsilon = 1e-5);
        assert!(heterogeneity(&ClusterComposition::new(vec![0; 4]), 4).is_err());
        assert_eq!(heterogeneity(&ClusterComposition::new(vec![5]), 1).unwrap(), 0.0);
    }

    fn snap(vm_id: usize, type_idx: usize, rho: f64) -> VmSnapshot {
        VmSnapshot {
            vm_id,
            type_idx,
            utilization: rho,
            mean_exec: 1.0,
            remaining_cycle: 100.0,
        }
    }

    #[test]
    fn deallocation_examples() {
        let p = ProvisionerParams::default();
        let q = QosBand::default();
        let homo = [snap(0, 1, 0.9), snap(1, 1, 0.95), snap(2, 1, 0.8)];
        assert_eq!(deallocation_policy(0.2, &homo, 4, &p, &q), DeallocationDecision::NoAction);
        assert_eq!(deallocation_policy(0.0, &homo, 4, &p, &q).marked(), Some(2));
        let hetero = [snap(0, 0, 0.9), snap(1, 1, 0.95), snap(2, 2, 0.92), snap(3, 3, 0.97)];
        assert!(matches!(
            deallocation_policy(0.01, &hetero, 4, &p, &q),
            DeallocationDecision::Retain { vm_id: 0, .. }
        ));
        assert_eq!(deallocation_policy(0.0, &[], 4, &p, &q), DeallocationDecision::NoAction);
        assert_eq!(deallocation_policy(0.0, &homo[..1], 4, &p, &q), DeallocationDecision::NoAction);
    }

    #[test]
    fn candidate_tie_breaks() {
        let mut a = snap(0, 0, 0.5);
        let mut b = snap(1, 1, 0.5);
        b.mean_exec = 2.0;
        assert_eq!(deallocation_candidate(&[a, b]).unwrap().vm_id, 1);
        b.mean_exec = 1.0;
        a.remaining_cycle = 50.0;
        assert_eq!(deallocation_candidate(&[a, b]).unwrap().vm_id, 0);
        a.remaining_cycle = 100.0;
        assert_eq!(deallocation_candidate(&[b, a]).unwrap().vm_id, 0);
    }

    #[test]
    fn remedial_examples() {
        let p = ProvisionerParams::default();
        assert_eq!(remedial_policy(0, &p, &QosBand::default()), 0);
        assert_eq!(remedial_policy(25, &p, &QosBand::default()), 25);
        assert_eq!(remedial_policy(15, &p, &QosBand::new(0.05, 0.2).unwrap()), 7);
    }

    #[test]
    fn params_validation() {
        assert!(ProvisionerParams::default().validate().is_ok());
        let bad = ProvisionerParams {
            k_demand: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(QosBand::new(0.2, 0.1).is_err());
    }
}
