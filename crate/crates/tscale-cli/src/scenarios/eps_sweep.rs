//! Euler polygon meeting a target defect ε, plus a step-halving sweep.

use serde_json::json;
use tscale::calculus::delta_derivative;
use tscale::picard::IvpSpec;
use tscale::polygon::{build_partition, eps_to_maxstep, euler_polygon};
use tscale::TsError;

use crate::config::ScenarioConfig;
use crate::report::Reporter;
use crate::CliError;

pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    let ts = cfg.timescale.build()?;
    let t0 = ts.min();
    let span = ts.max() - t0;
    let x0 = cfg.param_f64("x0", 1.0)?;
    let ball = cfg.param_f64("b", 1.0)?;
    let eps = cfg.param_f64("eps", 0.05)?;
    let halvings = cfg.param_usize("halvings", 4)?;
    let sweep_start = cfg.param_f64("sweep_start_maxstep", span.min(1.0) / 8.0)?;

    let spec = IvpSpec::scalar(|_, x| x, t0, x0, span, ball)
        .map_err(CliError::from_ts)?
        .with_lipschitz(1.0)
        .with_sup_bound(x0.abs() + ball);

    let choice = eps_to_maxstep(&spec, &ts, eps).map_err(CliError::from_ts)?;
    let sol = &choice.solution;

    let mut reporter = Reporter::new(cfg.scenario_dir())?;

    // Pointwise defect column; the exceptional set and the supremum carry
    // no value.
    let window = ts
        .intersect_window(t0, sol.values.last_t())
        .map_err(CliError::from_ts)?;
    let rows: Vec<String> = sol
        .values
        .grid()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let x = sol.values.value_at(i)[0];
            let excluded = sol.exceptional.iter().any(|&e| (e - t).abs() <= 1e-12)
                || (t - sol.values.last_t()).abs() <= 1e-12;
            let cell = if excluded {
                String::new()
            } else {
                match delta_derivative(&sol.values, &window, t) {
                    Ok(d) => (d[0] - x).abs().to_string(),
                    Err(TsError::UndefinedAtBoundary { .. }) => String::new(),
                    Err(_) => String::new(),
                }
            };
            format!("{t},{x},{cell}")
        })
        .collect();
    reporter.write_csv("polygon.csv", "t,x,defect_at_t", rows)?;

    reporter.assert(
        "defect-meets-eps",
        choice.measured_defect <= eps,
        format!("defect {:e} (target {eps:e})", choice.measured_defect),
    );

    // Step-halving sweep on the same window.
    let w_end = window.max();
    let mut step = sweep_start;
    let mut sweep = Vec::new();
    for _ in 0..=halvings {
        let partition = build_partition(&window, t0, w_end, step).map_err(CliError::from_ts)?;
        let swept = euler_polygon(&spec, &window, &partition).map_err(CliError::from_ts)?;
        sweep.push((step, swept.achieved_eps));
        step /= 2.0;
    }
    reporter.write_csv(
        "sweep.csv",
        "maxstep,defect",
        sweep.iter().map(|(s, d)| format!("{s},{d}")),
    )?;
    let monotone = sweep.windows(2).all(|w| w[1].1 <= w[0].1 * 1.1);
    reporter.assert(
        "sweep-monotone-with-slack",
        monotone,
        format!(
            "defects {:?}",
            sweep.iter().map(|(_, d)| *d).collect::<Vec<_>>()
        ),
    );

    let metrics = json!({
        "achieved_eps": choice.measured_defect,
        "maxstep": choice.maxstep,
        "cells": sol.partition.len() - 1,
        "delta": choice.delta,
        "refined": choice.refined,
    });
    reporter.finish(&cfg.scenario, cfg.timescale.kind(), metrics)
}
