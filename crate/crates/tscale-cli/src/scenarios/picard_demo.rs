//! Picard iteration walkthrough on `x^Δ = x`, `x(t0) = 1`: per-iteration
//! increments against the contraction estimates, ball containment and the
//! final defect; closed-form oracles on plain real and integer windows.

use serde_json::json;
use tscale::picard::{picard_iterate, IvpSpec};

use crate::config::{ScenarioConfig, TimescaleSpec};
use crate::report::Reporter;
use crate::CliError;

pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    let ts = cfg.timescale.build()?;
    let t0 = ts.min();
    let span = ts.max() - t0;
    let x0 = cfg.param_f64("x0", 1.0)?;
    // Defaults sized so h = min(a, b/M) covers the window: the growth of
    // x^D = x is e^span on a dense window and 2^span on the integers.
    let (default_ball, default_sup) = match &cfg.timescale {
        TimescaleSpec::Integers { .. } => {
            let growth = x0.abs() * 2.0f64.powi(span as i32);
            (growth * 1.2, (growth - x0.abs()) / span * 1.2)
        }
        _ => {
            let ball = x0.abs() * (span.exp() - 1.0) * 1.3 + 0.5;
            (ball, x0.abs() + ball)
        }
    };
    let ball = cfg.param_f64("b", default_ball)?;
    let sup_bound = cfg.param_f64("sup_bound", default_sup)?;
    let tol = cfg.tolerance_f64("tol", 1e-10)?;
    let oracle_tol = cfg.tolerance_f64("oracle_tol", 1e-6)?;
    let max_iter = cfg.param_usize("max_iter", 80)?;

    let spec = IvpSpec::scalar(|_, x| x, t0, x0, span, ball)
        .map_err(CliError::from_ts)?
        .with_lipschitz(1.0)
        .with_sup_bound(sup_bound);

    let result = picard_iterate(&spec, &ts, tol, max_iter).map_err(CliError::from_ts)?;

    let mut reporter = Reporter::new(cfg.scenario_dir())?;
    reporter.write_csv(
        "solution.csv",
        "t,x",
        result
            .solution
            .grid()
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{t},{}", result.solution.value_at(i)[0])),
    )?;
    reporter.write_csv(
        "iterations.csv",
        "n,increment,apriori_bound",
        result.increments.iter().enumerate().map(|(i, inc)| {
            let bound = result
                .apriori_bounds
                .get(i)
                .map(|b| b.to_string())
                .unwrap_or_default();
            format!("{},{inc},{bound}", i + 1)
        }),
    )?;

    reporter.assert(
        "ball-containment",
        result.max_ball_excursion <= ball + 1e-12,
        format!("max excursion {} (ball {ball})", result.max_ball_excursion),
    );
    let increments_bounded = result
        .increments
        .iter()
        .zip(&result.apriori_bounds)
        .all(|(inc, bound)| inc <= &(bound + 1e-12));
    reporter.assert(
        "increments-under-apriori-bounds",
        increments_bounded,
        format!("{} iterations compared", result.apriori_bounds.len()),
    );
    reporter.assert(
        "defect-small",
        result.defect <= 10.0 * tol,
        format!("defect {:e} (tol {tol:e})", result.defect),
    );

    // Closed-form oracle on the plain windows.
    let oracle: Option<Box<dyn Fn(f64) -> f64>> = match &cfg.timescale {
        TimescaleSpec::Reals { .. } => Some(Box::new(move |t: f64| x0 * (t - t0).exp())),
        TimescaleSpec::Integers { .. } => {
            Some(Box::new(move |t: f64| x0 * 2.0f64.powi((t - t0) as i32)))
        }
        _ => None,
    };
    if let Some(oracle) = oracle {
        let mut sup = 0.0f64;
        for (i, &t) in result.solution.grid().iter().enumerate() {
            sup = sup.max((result.solution.value_at(i)[0] - oracle(t)).abs());
        }
        reporter.assert(
            "matches-closed-form",
            sup <= oracle_tol,
            format!("sup deviation {sup:e} (tol {oracle_tol:e})"),
        );
    }

    let metrics = json!({
        "iterations": result.iterations,
        "final_increment": result.final_increment,
        "defect": result.defect,
        "halfwidth": result.halfwidth,
        "sup_bound": result.sup_bound,
        "stopped_by_bound": result.stopped_by_bound,
        "t0_right_dense_warning": result.t0_right_dense,
    });
    reporter.finish(&cfg.scenario, cfg.timescale.kind(), metrics)
}
