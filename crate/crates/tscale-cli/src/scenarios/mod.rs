//! Scenario registry and dispatch.

mod depca_stability;
mod eps_sweep;
mod nonlipschitz;
mod picard_demo;
mod sqrt_uniqueness;

use serde_json::json;

use crate::config::{ScenarioConfig, TimescaleSpec};
use crate::CliError;

/// Stable, ordered scenario list.
pub const SCENARIOS: [(&str, &str); 5] = [
    (
        "sqrt-uniqueness",
        "square-root field from zero: unique on scattered windows, two verified solutions on dense ones",
    ),
    (
        "nonlipschitz-uniqueness",
        "positive continuous field: multi-seed probe agrees without any Lipschitz constant",
    ),
    (
        "picard-demo",
        "Picard iteration on x^D = x with contraction estimates, ball containment and defect",
    ),
    (
        "eps-approx-sweep",
        "Euler polygon meeting a target defect, plus a step-halving defect sweep",
    ),
    (
        "depca-stability",
        "piecewise-constant-argument benchmark: certified error bounds and stability transfer",
    ),
];

pub fn names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// Run a scenario; returns the overall pass flag.
pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    match cfg.scenario.as_str() {
        "sqrt-uniqueness" => sqrt_uniqueness::run(cfg),
        "nonlipschitz-uniqueness" => nonlipschitz::run(cfg),
        "picard-demo" => picard_demo::run(cfg),
        "eps-approx-sweep" => eps_sweep::run(cfg),
        "depca-stability" => depca_stability::run(cfg),
        other => Err(CliError::Config(format!(
            "unknown scenario `{other}`; valid options: {}",
            names().join(", ")
        ))),
    }
}

/// Built-in default configuration per scenario.
pub fn default_config(name: &str) -> Result<ScenarioConfig, CliError> {
    let timescale = match name {
        "sqrt-uniqueness" | "nonlipschitz-uniqueness" | "eps-approx-sweep" => {
            json!({"kind": "reals", "start": 0.0, "end": 1.0, "resolution": 256})
        }
        "picard-demo" => json!({"kind": "reals", "start": 0.0, "end": 0.5, "resolution": 256}),
        "depca-stability" => {
            json!({"kind": "reals", "start": -1.0, "end": 15.0, "resolution": 2048})
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown scenario `{other}`; valid options: {}",
                names().join(", ")
            )))
        }
    };
    let spec: TimescaleSpec = serde_json::from_value(timescale)
        .map_err(|e| CliError::Config(format!("internal default broken: {e}")))?;
    Ok(ScenarioConfig {
        schema_version: crate::config::SCHEMA_VERSION,
        scenario: name.to_string(),
        timescale: spec,
        params: json!({}),
        tolerances: json!({}),
        outdir: "out".to_string(),
    })
}
