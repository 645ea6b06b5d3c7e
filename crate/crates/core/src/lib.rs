//! Simulation and decision library for utility-prioritized video-segment
//! transcoding on an elastic, heterogeneous VM cluster.
//!
//! The crate is organised along the request path: [`workload`] supplies
//! streams and execution-time estimates, [`admission`] prioritizes GOPs,
//! [`scheduler`] maps them onto VMs, [`provisioner`] sizes the cluster and
//! [`sim`] ties everything together in a discrete-event loop.

// `!(x > 0.0)` is used on purpose so NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admission;
pub mod provisioner;
pub mod scheduler;
pub mod sim;
pub mod workload;

pub use admission::{utility, AdmissionControl, UtilityParams};
pub use provisioner::{ProvisionerParams, QosBand};
pub use scheduler::{HeuristicKind, HeuristicRegistry, MappingHeuristic};
pub use sim::{run, MetricsReport, ProvisioningMode, SimConfig};
pub use workload::{generate_workload, load_trace, GeneratorParams, VmTypeCatalog, Workload};
