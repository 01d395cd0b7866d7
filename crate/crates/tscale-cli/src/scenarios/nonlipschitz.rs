//! Uniqueness without a Lipschitz constant: a positive continuous field
//! `x^Δ = c (1 + sqrt(|x|))` probed from several seeds.

use std::sync::Arc;

use serde_json::json;
use tscale::picard::{uniqueness_probe, IvpSpec};
use tscale::StateFn;

use crate::config::ScenarioConfig;
use crate::report::Reporter;
use crate::CliError;

pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    let ts = cfg.timescale.build()?;
    let t0 = ts.min();
    let span = ts.max() - t0;
    let c = cfg.param_f64("c", 1.0)?;
    if c <= 0.0 {
        return Err(CliError::Config("params.c must be positive".into()));
    }
    let ball = cfg.param_f64("b", (8.0 * span * c).max(4.0))?;
    let probe_tol = cfg.tolerance_f64("probe_tol", 1e-9)?;
    let max_iter = cfg.param_usize("max_iter", 120)?;

    let spec = IvpSpec::scalar(
        move |_, x: f64| c * (1.0 + x.abs().sqrt()),
        t0,
        0.0,
        span,
        ball,
    )
    .map_err(CliError::from_ts)?
    .with_sup_bound(c * (1.0 + ball.sqrt()));

    let quarter = ball / 4.0;
    let starts: Vec<StateFn> = vec![
        Arc::new(|_| vec![0.0]),
        Arc::new(move |_| vec![quarter]),
        Arc::new(move |t: f64| vec![quarter * (t - t0) / span.max(1e-9)]),
        Arc::new(move |t: f64| vec![-quarter * (t - t0) / span.max(1e-9)]),
    ];
    let probe =
        uniqueness_probe(&spec, &ts, &starts, probe_tol, max_iter).map_err(CliError::from_ts)?;

    let mut reporter = Reporter::new(cfg.scenario_dir())?;
    let grid = probe.runs[0].solution.grid().to_vec();
    reporter.write_csv(
        "limits.csv",
        "t,seed0,seed1,seed2,seed3",
        grid.iter().enumerate().map(|(i, t)| {
            let cells: Vec<String> = probe
                .runs
                .iter()
                .map(|r| r.solution.value_at(i)[0].to_string())
                .collect();
            format!("{t},{}", cells.join(","))
        }),
    )?;

    reporter.assert(
        "all-seeds-agree",
        probe.agree,
        format!(
            "max pairwise distance {:e} (tol {probe_tol:e})",
            probe.max_pairwise_distance
        ),
    );

    let metrics = json!({
        "c": c,
        "seeds": starts.len(),
        "max_pairwise_distance": probe.max_pairwise_distance,
        "iterations": probe.runs.iter().map(|r| r.iterations).collect::<Vec<_>>(),
    });
    reporter.finish(&cfg.scenario, cfg.timescale.kind(), metrics)
}
