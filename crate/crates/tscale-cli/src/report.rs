//! Deterministic artifact writing: CSV tables and the run summary.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Assertion {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub schema_version: u32,
    pub timescale_kind: String,
    pub pass: bool,
    pub assertions: Vec<Assertion>,
    pub metrics: Value,
    pub outputs: Vec<String>,
}

/// Collects tables and assertions for one scenario run, then writes
/// everything under `<outdir>/<scenario>/`.
pub struct Reporter {
    dir: PathBuf,
    outputs: Vec<String>,
    pub assertions: Vec<Assertion>,
}

impl Reporter {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Reporter {
            dir,
            outputs: Vec::new(),
            assertions: Vec::new(),
        })
    }

    pub fn assert(&mut self, name: &str, pass: bool, detail: String) {
        self.assertions.push(Assertion::new(name, pass, detail));
    }

    /// Write a CSV table; rows are pre-rendered cells. Uses the plain
    /// `Display` of `f64` so identical runs are byte-identical.
    pub fn write_csv(
        &mut self,
        file: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> Result<(), CliError> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = self.dir.join(file);
        fs::write(&path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(file.to_string());
        Ok(())
    }

    /// Write `summary.json` and return the overall pass flag.
    pub fn finish(
        mut self,
        scenario: &str,
        timescale_kind: &str,
        metrics: Value,
    ) -> Result<bool, CliError> {
        let pass = self.assertions.iter().all(|a| a.pass);
        self.outputs.push("summary.json".to_string());
        let summary = Summary {
            scenario: scenario.to_string(),
            schema_version: crate::config::SCHEMA_VERSION,
            timescale_kind: timescale_kind.to_string(),
            pass,
            assertions: self.assertions,
            metrics,
            outputs: self.outputs,
        };
        let path = self.dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Config(format!("cannot serialize summary: {e}")))?;
        fs::write(&path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(pass)
    }
}
