//! Built-in experiment configurations for the standard comparisons.

use vodsim_core::sim::ProvisioningMode;
use vodsim_core::HeuristicKind;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::CliError;

pub const PRESETS: [&str; 4] = ["static_vs_dynamic", "utility_vs_traditional", "remedial_ablation", "hetero_vs_homo"];

const GPU: &str = "g2.2xlarge";

/// Homogeneous comparison types: general purpose, memory optimized, GPU.
const HOMOGENEOUS: [(&str, &str); 3] = [("general", "m4.large"), ("memory", "r3.xlarge"), ("gpu", GPU)];

fn mode_value(mode: &ProvisioningMode) -> toml::Value {
    toml::Value::try_from(mode).expect("provisioning mode serializes")
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::new(name);
    cfg.base.heuristic = HeuristicKind::MMUT;
    cfg.scenarios = match name {
        "static_vs_dynamic" => {
            let mut v: Vec<Scenario> = (5..=10)
                .map(|n| Scenario::new(format!("static_{n}")).set("mode", mode_value(&ProvisioningMode::static_of(GPU, n))))
                .collect();
            v.push(Scenario::new("dynamic"));
            v
        }
        "utility_vs_traditional" => HeuristicKind::ALL
            .iter()
            .map(|h| Scenario::new(h.as_str().to_lowercase()).set("heuristic", h.as_str()))
            .collect(),
        "remedial_ablation" => vec![
            Scenario::new("remedial_on").set("provisioner.remedial", true),
            Scenario::new("remedial_off").set("provisioner.remedial", false),
        ],
        "hetero_vs_homo" => {
            let mut v = vec![Scenario::new("heterogeneous")];
            v.extend(HOMOGENEOUS.iter().map(|(label, ty)| {
                Scenario::new(format!("homogeneous_{label}"))
                    .restrict(&[ty])
                    .set("mode", mode_value(&ProvisioningMode::dynamic_from(ty, 1)))
                    .set("provisioner.remedial_type", *ty)
            }));
            v
        }
        _ => {
            return Err(CliError::Config(format!(
                "unknown preset `{name}`; expected one of: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
