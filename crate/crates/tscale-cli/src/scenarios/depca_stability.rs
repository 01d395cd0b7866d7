//! Stability-transfer benchmark: DEPCA runs across a list of cell counts,
//! compared against a method-of-steps reference and certified error bounds.

use std::sync::Arc;

use serde_json::json;
use tscale::depca::{stability_experiment, validate_system, DelaySystem};
use tscale::{Mat, MatrixField};

use crate::config::ScenarioConfig;
use crate::report::Reporter;
use crate::CliError;

pub fn run(cfg: &ScenarioConfig) -> Result<bool, CliError> {
    let ts = cfg.timescale.build()?;
    // `a` may be a constant or a named registry field.
    let a_field = cfg.param_field("a", -1.0)?;
    let c = cfg.param_f64("c", 0.1)?;
    let tau = cfg.param_f64("tau", 1.0)?;
    let eta = cfg.param_f64("eta", 1.0)?;
    let bound_coeff = cfg.param_f64("bound_coeff", 1.0)?;
    let decay_rate = cfg.param_f64("decay_rate", 1.0)?;
    let horizon = cfg.param_f64("horizon", 15.0)?;
    let ks = cfg.param_usize_list("ks", &[2, 4, 8, 16])?;
    let base_tol = cfg.tolerance_f64("base_tol", 1e-8)?;
    // Calibrated for the default horizon; shorter runs should widen it.
    let decay_threshold = cfg.tolerance_f64("decay_threshold", 1e-3)?;

    if tau <= 0.0 || horizon <= 2.0 * tau {
        return Err(CliError::Config("need tau > 0 and horizon > 2 tau".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Config(
            "params.ks must be positive integers".into(),
        ));
    }

    let sys = DelaySystem {
        a: MatrixField::new(1, move |t| Mat::scalar(a_field.eval(t))),
        f: Arc::new(move |_, xd: &[f64]| vec![c * xd[0]]),
        tau,
        eta: Arc::new(move |_| vec![eta]),
        bound_coeff,
        decay_rate,
        lipschitz: c.abs(),
    };
    let checks = validate_system(&sys, &ts);
    let report =
        stability_experiment(&sys, &ts, &ks, horizon, base_tol).map_err(CliError::from_ts)?;

    let mut reporter = Reporter::new(cfg.scenario_dir())?;
    reporter.write_csv(
        "error_table.csv",
        "k,h,sup_error,certified_bound,Mstar,lambda0",
        report.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.k, r.h, r.sup_error, r.certified_bound, r.mstar, r.lambda0
            )
        }),
    )?;

    // Reference trajectory, thinned to keep the artifact small.
    let y = &report.reference;
    let stride = y.len().div_ceil(512).max(1);
    reporter.write_csv(
        "reference.csv",
        "t,y",
        (0..y.len())
            .step_by(stride)
            .map(|i| format!("{},{}", y.grid()[i], y.value_at(i)[0])),
    )?;

    reporter.assert(
        "assumptions-validated",
        checks.regressive_ok && checks.rd_ok && checks.lipschitz_ok && checks.zero_fixed_ok,
        format!(
            "regressive {}, rd {}, lipschitz {} (worst quotient {:.3e}), f(t,0)=0 {}",
            checks.regressive_ok,
            checks.rd_ok,
            checks.lipschitz_ok,
            checks.worst_lipschitz_quotient,
            checks.zero_fixed_ok
        ),
    );
    reporter.assert(
        "errors-strictly-decreasing",
        report.monotone,
        format!(
            "sup errors {:?}",
            report.rows.iter().map(|r| r.sup_error).collect::<Vec<_>>()
        ),
    );
    reporter.assert(
        "errors-within-certified-bounds",
        report.all_bounds_ok,
        format!(
            "bounds {:?}",
            report
                .rows
                .iter()
                .map(|r| r.certified_bound)
                .collect::<Vec<_>>()
        ),
    );
    let all_stable = report.rows.iter().all(|r| r.stable);
    reporter.assert(
        "all-steps-stable",
        all_stable,
        format!(
            "lambda0 {:?}",
            report.rows.iter().map(|r| r.lambda0).collect::<Vec<_>>()
        ),
    );
    if all_stable {
        // Tail maxima over the last delay window of the horizon.
        let tail_start = horizon - tau;
        let tail_max = |g: &tscale::GridFunction| -> f64 {
            g.grid()
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= tail_start)
                .map(|(i, _)| g.value_at(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0f64, f64::max)
        };
        let y_tail = tail_max(&report.reference);
        let z_tail = report
            .rows
            .iter()
            .map(|r| tail_max(&r.z))
            .fold(0.0, f64::max);
        reporter.assert(
            "decay-below-threshold",
            y_tail < decay_threshold && z_tail < decay_threshold,
            format!(
                "tail max: reference {y_tail:e}, reconstructions {z_tail:e} (threshold {decay_threshold:e})"
            ),
        );
    }

    let metrics = json!({
        "ks": ks,
        "horizon": horizon,
        "w_history_mismatch": report.w_history_mismatch,
        "v0": report.v0,
        "rows": report.rows.iter().map(|r| json!({
            "k": r.k,
            "h": r.h,
            "sup_error": r.sup_error,
            "certified_bound": r.certified_bound,
            "Mstar": r.mstar,
            "lambda0": r.lambda0,
            "h0": if r.h0.is_finite() { json!(r.h0) } else { json!("inf") },
            "stable": r.stable,
        })).collect::<Vec<_>>(),
    });
    reporter.finish(&cfg.scenario, cfg.timescale.kind(), metrics)
}
