//! `tscale`: scenario runner for time-scale dynamic equations.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when a scenario
//! runs but one of its built-in assertions fails.

mod config;
mod report;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{apply_override, ScenarioConfig};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, unknown scenario, unreadable files.
    Config(String),
    /// The scenario ran but could not produce a result (solver failure).
    Run(String),
}

impl CliError {
    fn from_ts(e: tscale::TsError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Run(msg) => write!(f, "run error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tscale",
    version,
    about = "Dynamic equations on time scales: scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available scenarios.
    List {
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario from a config document or from built-in defaults.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON config document.
    config: Option<PathBuf>,
    /// Scenario name; uses the built-in default config.
    #[arg(long)]
    scenario: Option<String>,
    /// Override a config value by dotted path, e.g. --set params.eps=0.01
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (overrides the config's `outdir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("scenario assertions failed (see summary.json)");
            ExitCode::from(3)
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Run(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::List { json } => {
            if json {
                let items: Vec<_> = scenarios::SCENARIOS
                    .iter()
                    .map(|(name, about)| serde_json::json!({"name": name, "description": about}))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&items).unwrap());
            } else {
                for (name, about) in scenarios::SCENARIOS {
                    println!("{name:24} {about}");
                }
            }
            Ok(true)
        }
        Command::Run(args) => run_command(args),
    }
}

fn run_command(args: RunArgs) -> Result<bool, CliError> {
    let mut value = match (&args.config, &args.scenario) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid JSON in {}: {e}", path.display())))?
        }
        (None, Some(name)) => serde_json::to_value(scenarios::default_config(name)?)
            .map_err(|e| CliError::Config(e.to_string()))?,
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "pass either a config file or --scenario, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "nothing to run: pass a config file or --scenario <name>".into(),
            ))
        }
    };

    for assignment in &args.sets {
        apply_override(&mut value, assignment)?;
    }
    let mut cfg = ScenarioConfig::from_value(value)?;
    if let Some(out) = args.out {
        cfg.outdir = out.display().to_string();
    }
    if !scenarios::names().contains(&cfg.scenario.as_str()) {
        return Err(CliError::Config(format!(
            "unknown scenario `{}`; valid options: {}",
            cfg.scenario,
            scenarios::names().join(", ")
        )));
    }

    let pass = scenarios::run(&cfg)?;
    println!(
        "{}: {} (artifacts in {})",
        cfg.scenario,
        if pass { "ok" } else { "FAILED" },
        cfg.scenario_dir().display()
    );
    Ok(pass)
}
