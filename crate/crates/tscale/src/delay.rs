//! Delay dynamic equations by the method of steps.
//!
//! On each interval of length `tau` the delayed argument refers to already
//! known data (history or a previously solved piece), so the equation
//! reduces to an ordinary IVP that the Picard solver handles. Pieces are
//! concatenated continuously. Scattered jumps wider than the delay are
//! stepped explicitly.

use std::sync::Arc;

use crate::error::{Result, TsError};
use crate::field::StateFn;
use crate::grid::{euclid_norm, GridFunction};
use crate::picard::{picard_iterate, IvpSpec};
use crate::timescale::{TimeScale, MEMBERSHIP_TOL};

/// Right-hand side of a delay equation: `(t, x(t), x(t - tau)) -> dx`.
pub type DelayRhs = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Delay initial value problem
/// `x^Δ(t) = rhs(t, x(t), x(t - tau))` on `[a, b] ∩ T`,
/// `x(t) = history(t)` on `[a - tau, a] ∩ T`.
///
/// The time scale must cover `[a - tau, b]`. When `t - tau` is not a
/// time-scale point the delayed value is taken at the nearest time-scale
/// point at or below it.
#[derive(Clone)]
pub struct DelayIvp {
    pub rhs: DelayRhs,
    pub tau: f64,
    /// History rule on `[a - tau, a] ∩ T`; its value at `a` is the initial
    /// state.
    pub history: StateFn,
    /// Window `[a, b]`.
    pub window: (f64, f64),
    pub dim: usize,
    /// Optional Lipschitz constant of `rhs` in the current state, passed to
    /// the inner solver.
    pub lipschitz_in_state: Option<f64>,
}

impl DelayIvp {
    pub fn new(
        rhs: DelayRhs,
        tau: f64,
        history: StateFn,
        window: (f64, f64),
        dim: usize,
    ) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(TsError::InvalidArgument("delay must be positive".into()));
        }
        if window.1 <= window.0 {
            return Err(TsError::InvalidArgument("window must be nonempty".into()));
        }
        Ok(DelayIvp {
            rhs,
            tau,
            history,
            window,
            dim,
            lipschitz_in_state: None,
        })
    }

    /// The purely delayed form `x^Δ(t) = f(t, x(t - tau))`.
    pub fn pure_delay(
        f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
        tau: f64,
        history: StateFn,
        window: (f64, f64),
        dim: usize,
    ) -> Result<Self> {
        Self::new(
            Arc::new(move |t, _x, xd: &[f64]| f(t, xd)),
            tau,
            history,
            window,
            dim,
        )
    }

    pub fn with_lipschitz_in_state(mut self, l: f64) -> Self {
        self.lipschitz_in_state = Some(l);
        self
    }
}

const MAX_CHAINED_SOLVES: usize = 100_000;

/// Solve a delay IVP by the method of steps.
///
/// Returns the solution sampled over `[a, b] ∩ T`. `inner_tol` is the
/// fixed-point tolerance of each Picard sub-solve.
pub fn method_of_steps(ivp: &DelayIvp, ts: &TimeScale, inner_tol: f64) -> Result<GridFunction> {
    let (a, b) = ivp.window;
    let a = ts.snap(a)?;
    let b = ts.snap(b)?;
    if ts.min() > a - ivp.tau + MEMBERSHIP_TOL {
        return Err(TsError::HistoryMissing { point: a - ivp.tau });
    }

    let x_init = (ivp.history)(a);
    if x_init.len() != ivp.dim {
        return Err(TsError::InvalidArgument(
            "history dimension does not match the system".into(),
        ));
    }

    let mut solution = GridFunction::new(vec![a], x_init.clone(), ivp.dim).expect("one-point grid");
    let mut guard = 0usize;

    while solution.last_t() < b - MEMBERSHIP_TOL {
        guard += 1;
        if guard > MAX_CHAINED_SOLVES {
            return Err(TsError::InvalidArgument(
                "method_of_steps exceeded the solve budget; window too long".into(),
            ));
        }
        let cur = solution.last_t();
        let x_cur = solution.last_value().to_vec();
        let sigma = ts.sigma(cur)?;

        // A scattered jump at least as wide as the delay cannot sit inside
        // any single step interval; apply the jump recurrence directly.
        if sigma > cur + MEMBERSHIP_TOL && sigma - cur >= ivp.tau - MEMBERSHIP_TOL {
            let mu = sigma - cur;
            let xd = delayed_value(ivp, ts, &solution, cur - ivp.tau)?;
            let dx = (ivp.rhs)(cur, &x_cur, &xd);
            let next: Vec<f64> = x_cur.iter().zip(&dx).map(|(x, d)| x + mu * d).collect();
            let piece = GridFunction::new(
                vec![cur, sigma],
                x_cur.iter().copied().chain(next).collect(),
                ivp.dim,
            )?;
            solution = solution.concat(&piece)?;
            continue;
        }

        // Step interval of length at most tau, so the delayed argument only
        // references known data.
        let end = (cur + ivp.tau).min(b);
        let piece = solve_known_delay(ivp, ts, &solution, cur, end, &x_cur, inner_tol)?;
        if piece.last_t() <= cur + MEMBERSHIP_TOL {
            return Err(TsError::NoConvergence {
                iterations: guard,
                last_increment: f64::NAN,
            });
        }
        solution = solution.concat(&piece)?;
    }
    Ok(solution)
}

/// Solve `x^Δ = rhs(t, x, known(t - tau))` over `[start, end] ∩ T` by
/// chaining Picard windows; the delayed data is frozen in `known`/history.
fn solve_known_delay(
    ivp: &DelayIvp,
    ts: &TimeScale,
    known: &GridFunction,
    start: f64,
    end: f64,
    x_start: &[f64],
    inner_tol: f64,
) -> Result<GridFunction> {
    let mut out = GridFunction::new(vec![start], x_start.to_vec(), ivp.dim)?;
    let mut guard = 0usize;
    while out.last_t() < end - MEMBERSHIP_TOL {
        guard += 1;
        if guard > MAX_CHAINED_SOLVES {
            return Err(TsError::InvalidArgument(
                "inner solve exceeded the chain budget".into(),
            ));
        }
        let cur = out.last_t();
        let x_cur = out.last_value().to_vec();

        // The already-solved prefix extends the known data.
        let rhs = ivp.rhs.clone();
        let tau = ivp.tau;
        let history = ivp.history.clone();
        let hist_start = ivp.window.0;
        let merged = merge_known(known, &out)?;
        let ts_cloned = ts.clone();
        let f = move |t: f64, x: &[f64]| -> Vec<f64> {
            let td = t - tau;
            let xd = lookup_delayed(&ts_cloned, &merged, &history, hist_start, td)
                .unwrap_or_else(|_| vec![f64::NAN; x.len()]);
            rhs(t, x, &xd)
        };

        let mut ball = 2.0 * (1.0 + euclid_norm(&x_cur));
        let mut attempt = 0usize;
        loop {
            attempt += 1;
            let mut spec = IvpSpec::new(Arc::new(f.clone()), cur, x_cur.clone(), end - cur, ball)?;
            if let Some(l) = ivp.lipschitz_in_state {
                spec = spec.with_lipschitz(l);
            }
            match picard_iterate(&spec, ts, inner_tol, 200) {
                Ok(result) => {
                    out = out.concat(&result.solution)?;
                    break;
                }
                Err(TsError::LeftDomain { .. }) if attempt < 8 => {
                    ball *= 2.0;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

fn merge_known(known: &GridFunction, extension: &GridFunction) -> Result<GridFunction> {
    if extension.len() <= 1 {
        return Ok(known.clone());
    }
    known.clone().concat(extension)
}

fn delayed_value(
    ivp: &DelayIvp,
    ts: &TimeScale,
    solution: &GridFunction,
    td: f64,
) -> Result<Vec<f64>> {
    lookup_delayed(ts, solution, &ivp.history, ivp.window.0, td)
}

/// Value of the (history + solved prefix) trajectory at the nearest
/// time-scale point at or below `td`.
fn lookup_delayed(
    ts: &TimeScale,
    solution: &GridFunction,
    history: &StateFn,
    hist_boundary: f64,
    td: f64,
) -> Result<Vec<f64>> {
    let anchor = ts
        .floor_point(td)
        .ok_or(TsError::HistoryMissing { point: td })?;
    if anchor < hist_boundary - MEMBERSHIP_TOL {
        Ok(history(anchor))
    } else if anchor <= solution.last_t() + MEMBERSHIP_TOL {
        solution.eval(anchor.min(solution.last_t()))
    } else {
        Err(TsError::HistoryMissing { point: td })
    }
}
