//! Scenario configuration: a single versioned JSON document plus dotted-path
//! overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tscale::{ScalarField, TimeScale};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Named coefficient fields available to config documents.
pub const FIELD_REGISTRY: [&str; 6] = ["zero", "one", "neg_one", "sin", "cos", "damped_osc"];

/// Resolve a scalar coefficient rule by registry name.
pub fn named_scalar_field(name: &str) -> Result<ScalarField, CliError> {
    match name {
        "zero" => Ok(ScalarField::constant(0.0)),
        "one" => Ok(ScalarField::constant(1.0)),
        "neg_one" => Ok(ScalarField::constant(-1.0)),
        "sin" => Ok(ScalarField::new(f64::sin)),
        "cos" => Ok(ScalarField::new(f64::cos)),
        // Decaying coefficient with a small oscillation.
        "damped_osc" => Ok(ScalarField::new(|t: f64| -1.0 + 0.1 * t.sin())),
        other => Err(CliError::Config(format!(
            "unknown field `{other}`; registry: {}",
            FIELD_REGISTRY.join(", ")
        ))),
    }
}

/// Time-scale construction spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimescaleSpec {
    Reals {
        start: f64,
        end: f64,
        resolution: usize,
    },
    Integers {
        start: f64,
        end: f64,
    },
    Qscale {
        q: f64,
        nmax: u32,
    },
    Segments {
        segments: Vec<[f64; 2]>,
        resolution: usize,
    },
}

impl TimescaleSpec {
    pub fn build(&self) -> Result<TimeScale, CliError> {
        let ts = match self {
            TimescaleSpec::Reals {
                start,
                end,
                resolution,
            } => TimeScale::reals(*start, *end, *resolution),
            TimescaleSpec::Integers { start, end } => TimeScale::integers(*start, *end),
            TimescaleSpec::Qscale { q, nmax } => TimeScale::qscale(*q, *nmax),
            TimescaleSpec::Segments {
                segments,
                resolution,
            } => TimeScale::from_segments(
                segments.iter().map(|s| (s[0], s[1])).collect(),
                *resolution,
            ),
        };
        ts.map_err(|e| CliError::Config(format!("invalid timescale: {e}")))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TimescaleSpec::Reals { .. } => "reals",
            TimescaleSpec::Integers { .. } => "integers",
            TimescaleSpec::Qscale { .. } => "qscale",
            TimescaleSpec::Segments { .. } => "segments",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub timescale: TimescaleSpec,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default = "empty_object")]
    pub tolerances: Value,
    #[serde(default = "default_outdir")]
    pub outdir: String,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

fn default_outdir() -> String {
    "out".to_string()
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Scenario output directory `<outdir>/<scenario>/`.
    pub fn scenario_dir(&self) -> PathBuf {
        Path::new(&self.outdir).join(&self.scenario)
    }

    /// Pull a scalar parameter with a default.
    pub fn param_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        read_f64(&self.params, key, default)
    }

    /// A coefficient parameter: either a number (constant field) or the
    /// name of a registry field.
    pub fn param_field(&self, key: &str, default: f64) -> Result<ScalarField, CliError> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(ScalarField::constant(default)),
            Some(Value::String(name)) => named_scalar_field(name),
            Some(v) => {
                let c = v.as_f64().ok_or_else(|| {
                    CliError::Config(format!("params.{key}: number or field name"))
                })?;
                Ok(ScalarField::constant(c))
            }
        }
    }

    pub fn tolerance_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        read_f64(&self.tolerances, key, default)
    }

    pub fn param_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| CliError::Config(format!("params.{key} must be an integer"))),
        }
    }

    pub fn param_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| CliError::Config(format!("params.{key}: not an integer")))
                })
                .collect(),
            Some(_) => Err(CliError::Config(format!("params.{key} must be a list"))),
        }
    }
}

fn read_f64(obj: &Value, key: &str, default: f64) -> Result<f64, CliError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => {
            let x = v
                .as_f64()
                .ok_or_else(|| CliError::Config(format!("{key} must be a number")))?;
            if !x.is_finite() {
                return Err(CliError::Config(format!("{key} must be finite")));
            }
            Ok(x)
        }
    }
}

/// Apply a `key.path=value` override to a JSON tree, creating intermediate
/// objects as needed. Values parse as JSON first, falling back to strings.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{assignment}`")))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(CliError::Config(format!("empty path segment in `{path}`")));
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().unwrap();
        if parts.peek().is_none() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
