//! `x^Δ = sqrt(x)`, `x(t0) = 0`: two genuine solutions on a dense window,
//! a unique zero solution when the start is right-scattered.

use std::sync::Arc;

use serde_json::json;
use tscale::grid::GridFunction;
use tscale::picard::{uniqueness_probe, verify_solution, IvpSpec};
use tscale::StateFn;

use crate::config::ScenarioConfig;
use crate::report::Reporter;
use crate::CliError;

pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    let ts = cfg.timescale.build()?;
    let t0 = ts.min();
    let span = ts.max() - t0;
    let ball = cfg.param_f64("b", (span * span / 4.0) * 1.5 + 1.0)?;
    let probe_tol = cfg.tolerance_f64("probe_tol", 1e-9)?;
    let defect_tol = cfg.tolerance_f64("defect_tol", 1e-8)?;
    let max_iter = cfg.param_usize("max_iter", 80)?;

    let spec = IvpSpec::scalar(|_, x: f64| x.max(0.0).sqrt(), t0, 0.0, span, ball)
        .map_err(CliError::from_ts)?
        .with_sup_bound(ball.sqrt());

    let mut reporter = Reporter::new(cfg.scenario_dir())?;

    // Candidate solutions sampled over the whole window.
    let grid = ts.grid(t0, ts.max()).map_err(CliError::from_ts)?;
    let zero = GridFunction::from_scalar_fn(grid.clone(), |_| 0.0).unwrap();
    let parabola =
        GridFunction::from_scalar_fn(grid.clone(), |t| (t - t0) * (t - t0) / 4.0).unwrap();
    let defect_zero = verify_solution(&zero, &spec, &ts).map_err(CliError::from_ts)?;
    let defect_parabola = verify_solution(&parabola, &spec, &ts).map_err(CliError::from_ts)?;

    reporter.write_csv(
        "candidates.csv",
        "t,zero,parabola",
        grid.iter()
            .enumerate()
            .map(|(i, t)| format!("{t},{},{}", zero.value_at(i)[0], parabola.value_at(i)[0])),
    )?;

    let starts: Vec<StateFn> = vec![
        Arc::new(|_| vec![0.0]),
        Arc::new(move |t: f64| vec![(t - t0) * (t - t0) / 4.0]),
    ];
    let probe =
        uniqueness_probe(&spec, &ts, &starts, probe_tol, max_iter).map_err(CliError::from_ts)?;

    let run_grid = probe.runs[0].solution.grid().to_vec();
    reporter.write_csv(
        "limits.csv",
        "t,seed_zero,seed_parabola",
        run_grid.iter().enumerate().map(|(i, t)| {
            format!(
                "{t},{},{}",
                probe.runs[0].solution.value_at(i)[0],
                probe.runs[1].solution.value_at(i)[0]
            )
        }),
    )?;

    // The dichotomy: a right-scattered start forces the unique zero
    // solution; a right-dense start admits both candidates.
    let start_scattered = ts.classify(t0).map_err(CliError::from_ts)?.right_scattered;
    if start_scattered {
        reporter.assert(
            "unique-zero-limit",
            probe.agree,
            format!(
                "max pairwise distance {:e} (tol {probe_tol:e})",
                probe.max_pairwise_distance
            ),
        );
        let worst_end = probe
            .runs
            .iter()
            .map(|r| r.solution.last_value()[0].abs())
            .fold(0.0f64, f64::max);
        reporter.assert(
            "limit-is-zero",
            worst_end <= defect_tol,
            format!("largest endpoint magnitude {worst_end:e}"),
        );
    } else {
        reporter.assert(
            "zero-candidate-verified",
            defect_zero <= defect_tol,
            format!("defect {defect_zero:e} (tol {defect_tol:e})"),
        );
        reporter.assert(
            "parabola-candidate-verified",
            defect_parabola <= defect_tol,
            format!("defect {defect_parabola:e} (tol {defect_tol:e})"),
        );
        reporter.assert(
            "non-uniqueness-detected",
            !probe.agree,
            format!(
                "max pairwise distance {:e} exceeds tol {probe_tol:e}",
                probe.max_pairwise_distance
            ),
        );
    }

    let metrics = json!({
        "start_right_scattered": start_scattered,
        "defect_zero": defect_zero,
        "defect_parabola": defect_parabola,
        "max_pairwise_distance": probe.max_pairwise_distance,
        "probe_agree": probe.agree,
    });
    reporter.finish(&cfg.scenario, cfg.timescale.kind(), metrics)
}
