//! Picard–Lindelöf solver: fixed-point iteration for `x^Δ = f(t, x)`,
//! `x(t0) = x0` on `[t0, t0 + h] ∩ T`, with the contraction estimate
//! `M L^{n-1} h_n(t, t0)`, defect verification and a uniqueness probe.

use crate::calculus::{cumulative_integral, monomials_upto};
use crate::error::{Result, TsError};
use crate::field::{Rhs, StateFn};
use crate::grid::{euclid_dist, euclid_norm, GridFunction};
use crate::timescale::{TimeScale, MEMBERSHIP_TOL};

/// Initial value problem on a time rectangle.
///
/// The rectangle is `D = {(t, x) : t ∈ [t0 - a, t0 + a] ∩ T, |x - x0| <= b}`
/// with the Euclidean norm on states. `lipschitz` and `sup_bound` are the
/// usual constants `L` and `M = max_D |f|`; either may be omitted and will
/// be estimated by lattice sampling when needed.
#[derive(Clone)]
pub struct IvpSpec {
    pub f: Rhs,
    pub t0: f64,
    pub x0: Vec<f64>,
    /// Half-width of the time rectangle.
    pub a: f64,
    /// Radius of the state ball.
    pub b: f64,
    pub lipschitz: Option<f64>,
    pub sup_bound: Option<f64>,
}

impl IvpSpec {
    pub fn new(f: Rhs, t0: f64, x0: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 || !b.is_finite() || b <= 0.0 {
            return Err(TsError::InvalidArgument(
                "rectangle half-widths a, b must be positive".into(),
            ));
        }
        if x0.is_empty() {
            return Err(TsError::InvalidArgument("x0 must be nonempty".into()));
        }
        Ok(IvpSpec {
            f,
            t0,
            x0,
            a,
            b,
            lipschitz: None,
            sup_bound: None,
        })
    }

    /// Scalar problem from a plain closure.
    pub fn scalar(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        t0: f64,
        x0: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        Self::new(
            std::sync::Arc::new(move |t, x: &[f64]| vec![f(t, x[0])]),
            t0,
            vec![x0],
            a,
            b,
        )
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_sup_bound(mut self, m: f64) -> Self {
        self.sup_bound = Some(m);
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

/// Outcome of a Picard iteration run.
#[derive(Debug, Clone)]
pub struct PicardResult {
    /// Converged iterate on the forward window grid.
    pub solution: GridFunction,
    /// Number of iterations performed.
    pub iterations: usize,
    /// Sup-norm of the last increment `phi_n - phi_{n-1}`.
    pub final_increment: f64,
    /// All measured increments, index `n-1` holding `|phi_n - phi_{n-1}|`.
    pub increments: Vec<f64>,
    /// Contraction estimates `M L^{n-1} h_n(t_end, t0)` per iteration
    /// (empty when no Lipschitz constant was available).
    pub apriori_bounds: Vec<f64>,
    /// Existence half-width `h = min(a, b / M)` used for the window.
    pub halfwidth: f64,
    /// Sup-norm residual of the integral equation.
    pub defect: f64,
    /// Sup bound `M` actually used.
    pub sup_bound: f64,
    /// Lipschitz constant used for the bounds, if any.
    pub lipschitz: Option<f64>,
    /// True when `lipschitz` came from difference-quotient sampling rather
    /// than the caller.
    pub lipschitz_estimated: bool,
    /// True when the stop was certified by the contraction tail bound
    /// rather than the measured increment alone.
    pub stopped_by_bound: bool,
    /// Warning flag: t0 is a right-dense point. The classical statement
    /// assumes otherwise; the iteration is still attempted and convergence
    /// reported empirically.
    pub t0_right_dense: bool,
    /// Largest observed `|phi_n(t) - x0|` across all iterates.
    pub max_ball_excursion: f64,
}

/// Estimated sup bound `M = max_D |f|` by lattice sampling, inflated 5%.
pub fn estimate_sup_bound(spec: &IvpSpec, ts: &TimeScale) -> Result<f64> {
    let window = ts
        .intersect_window(spec.t0 - spec.a, spec.t0 + spec.a)
        .map_err(|_| TsError::EmptyDomain)?;
    let times = thin(&window.full_grid(), 64);
    let states = state_lattice(&spec.x0, spec.b, 9);
    let mut m = 0.0f64;
    for &t in &times {
        for x in &states {
            m = m.max(euclid_norm(&(spec.f)(t, x)));
        }
    }
    Ok(m * 1.05)
}

/// Estimated Lipschitz constant by sampled difference quotients, inflated
/// 10%.
pub fn estimate_lipschitz(spec: &IvpSpec, ts: &TimeScale) -> Result<f64> {
    let window = ts
        .intersect_window(spec.t0 - spec.a, spec.t0 + spec.a)
        .map_err(|_| TsError::EmptyDomain)?;
    let times = thin(&window.full_grid(), 16);
    let states = state_lattice(&spec.x0, spec.b, 7);
    let mut l = 0.0f64;
    for &t in &times {
        for (i, x) in states.iter().enumerate() {
            let fx = (spec.f)(t, x);
            for y in states.iter().skip(i + 1) {
                let d = euclid_dist(x, y);
                if d < 1e-9 {
                    continue;
                }
                let fy = (spec.f)(t, y);
                l = l.max(euclid_dist(&fx, &fy) / d);
            }
        }
    }
    Ok(l * 1.1)
}

/// Existence half-width `h = min(a, b / M)`; `h = a` for the zero field.
pub fn existence_halfwidth(spec: &IvpSpec, sup_bound: f64) -> f64 {
    if sup_bound <= 0.0 {
        spec.a
    } else {
        spec.a.min(spec.b / sup_bound)
    }
}

/// Contraction estimate `M L^{n-1} h_n(t, t0)` for iteration `n >= 1`.
pub fn apriori_bound(
    n: usize,
    sup_bound: f64,
    lipschitz: f64,
    ts: &TimeScale,
    t0: f64,
    t: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(TsError::InvalidArgument(
            "apriori_bound needs n >= 1".into(),
        ));
    }
    let h = crate::calculus::monomial(n, ts, t, t0)?;
    Ok(sup_bound * lipschitz.powi(n as i32 - 1) * h)
}

/// Picard iteration on the forward window `[t0, t0 + h] ∩ T`.
///
/// Iterates `phi_n(t) = x0 + ∫_{[t0, t] ∩ T} f(s, phi_{n-1}(s)) Δs` from
/// `phi_0 ≡ x0` and stops once the sup-norm increment falls to `tol`, or
/// earlier when the contraction tail bound certifies it. Errors with
/// `NoConvergence` after `max_iter` iterations or three consecutive
/// increment growths, and with `LeftDomain` if an iterate exits the state
/// ball.
pub fn picard_iterate(
    spec: &IvpSpec,
    ts: &TimeScale,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    picard_run(spec, ts, tol, max_iter, None)
}

/// Picard iteration seeded from an explicit initial iterate instead of the
/// constant `x0`. The seed must stay inside the state ball.
pub fn picard_iterate_seeded(
    spec: &IvpSpec,
    ts: &TimeScale,
    tol: f64,
    max_iter: usize,
    seed: &StateFn,
) -> Result<PicardResult> {
    picard_run(spec, ts, tol, max_iter, Some(seed))
}

fn picard_run(
    spec: &IvpSpec,
    ts: &TimeScale,
    tol: f64,
    max_iter: usize,
    seed: Option<&StateFn>,
) -> Result<PicardResult> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(TsError::InvalidArgument(
            "tolerance must be positive".into(),
        ));
    }
    let dim = spec.dim();
    let (sup_bound, _) = resolve_sup_bound(spec, ts)?;
    let h = existence_halfwidth(spec, sup_bound);
    let t0 = ts.snap(spec.t0)?;
    let window = ts.intersect_window(t0, t0 + h)?;
    let grid = window.full_grid();
    let n_pts = grid.len();
    let t_end = *grid.last().unwrap();

    let t0_right_dense = {
        let c = ts.classify(t0)?;
        c.is_right_dense() && !c.is_supremum
    };

    let (lipschitz, lipschitz_estimated) = match spec.lipschitz {
        Some(l) => (Some(l), false),
        None => match estimate_lipschitz(spec, ts) {
            Ok(l) => (Some(l), true),
            Err(_) => (None, false),
        },
    };

    // Tail bounds M L^{n-1} h_n(t_end, t0), computed once and exactly.
    let tail_bounds: Vec<f64> = match lipschitz {
        Some(l) => {
            let order = max_iter.min(crate::calculus::MAX_MONOMIAL_ORDER);
            let hs = monomials_upto(order, &window, t_end, t0)?;
            (1..hs.len())
                .map(|n| sup_bound * l.powi(n as i32 - 1) * hs[n])
                .collect()
        }
        None => Vec::new(),
    };

    let ball_slack = 1e-9 * (1.0 + spec.b);
    let mut phi: Vec<f64> = match seed {
        None => grid.iter().flat_map(|_| spec.x0.iter().copied()).collect(),
        Some(s) => {
            let mut v = Vec::with_capacity(n_pts * dim);
            for &g in &grid {
                let x = s(g);
                if x.len() != dim {
                    return Err(TsError::InvalidArgument(
                        "seed dimension does not match x0".into(),
                    ));
                }
                if euclid_dist(&x, &spec.x0) > spec.b + ball_slack {
                    return Err(TsError::InvalidArgument(format!(
                        "seed leaves the state ball at t = {g}"
                    )));
                }
                v.extend_from_slice(&x);
            }
            v
        }
    };

    let mut increments = Vec::new();
    let mut bounds_used = Vec::new();
    let mut max_excursion = 0.0f64;
    let mut growth_streak = 0usize;
    let mut stopped_by_bound = false;
    let mut converged = false;

    let mut samples = vec![0.0; n_pts * dim];
    for n in 1..=max_iter {
        for (i, &g) in grid.iter().enumerate() {
            let value = (spec.f)(g, &phi[i * dim..(i + 1) * dim]);
            debug_assert_eq!(value.len(), dim);
            samples[i * dim..(i + 1) * dim].copy_from_slice(&value);
        }
        let cum = cumulative_integral(&window, &grid, &samples, dim);
        let mut next = vec![0.0; n_pts * dim];
        let mut increment = 0.0f64;
        for i in 0..n_pts {
            for d in 0..dim {
                next[i * dim + d] = spec.x0[d] + cum[i * dim + d];
            }
            let slot = i * dim..(i + 1) * dim;
            let excursion = euclid_dist(&next[slot.clone()], &spec.x0);
            max_excursion = max_excursion.max(excursion);
            if excursion > spec.b + ball_slack {
                return Err(TsError::LeftDomain {
                    point: grid[i],
                    radius: spec.b,
                });
            }
            increment = increment.max(euclid_dist(&next[slot.clone()], &phi[slot]));
        }
        phi = next;
        if !increment.is_finite() {
            return Err(TsError::NoConvergence {
                iterations: n,
                last_increment: increment,
            });
        }
        if let Some(prev) = increments.last() {
            if increment > *prev {
                growth_streak += 1;
            } else {
                growth_streak = 0;
            }
        }
        increments.push(increment);
        if let Some(b) = tail_bounds.get(n - 1) {
            bounds_used.push(*b);
        }
        if increment <= tol {
            converged = true;
            break;
        }
        // The tail bound only certifies the stop when the measured increment
        // is consistent with it; an optimistic estimated L is exposed here.
        if tail_bounds
            .get(n - 1)
            .is_some_and(|b| *b <= tol && increment <= *b)
        {
            converged = true;
            stopped_by_bound = true;
            break;
        }
        if growth_streak >= 3 {
            return Err(TsError::NoConvergence {
                iterations: n,
                last_increment: increment,
            });
        }
    }

    if !converged {
        return Err(TsError::NoConvergence {
            iterations: max_iter,
            last_increment: increments.last().copied().unwrap_or(f64::INFINITY),
        });
    }

    let solution = GridFunction::new(grid, phi, dim)?;
    let defect = verify_on_window(&solution, spec, &window)?;
    Ok(PicardResult {
        iterations: increments.len(),
        final_increment: increments.last().copied().unwrap_or(0.0),
        increments,
        apriori_bounds: bounds_used,
        halfwidth: h,
        defect,
        sup_bound,
        lipschitz,
        lipschitz_estimated,
        stopped_by_bound,
        t0_right_dense,
        max_ball_excursion: max_excursion,
        solution,
    })
}

/// Picard iteration on the backward window `[t0 - h, t0] ∩ T`, solved by
/// reflecting time around `t0` and running the forward iteration on the
/// mirrored scale. On dense stretches this is the classical backward
/// solution; at scattered points it yields the reflected (nabla-adjoint)
/// reading of the recurrence.
pub fn picard_iterate_backward(
    spec: &IvpSpec,
    ts: &TimeScale,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    let t0 = ts.snap(spec.t0)?;
    let reflected_segments: Vec<(f64, f64)> = ts
        .segments()
        .iter()
        .rev()
        .map(|&(a, b)| (2.0 * t0 - b, 2.0 * t0 - a))
        .collect();
    let rts = TimeScale::from_segments(reflected_segments, ts.resolution())?;
    let f = spec.f.clone();
    let reflected = IvpSpec {
        f: std::sync::Arc::new(move |s, x: &[f64]| {
            let mut v = f(2.0 * t0 - s, x);
            v.iter_mut().for_each(|c| *c = -*c);
            v
        }),
        t0,
        x0: spec.x0.clone(),
        a: spec.a,
        b: spec.b,
        lipschitz: spec.lipschitz,
        sup_bound: spec.sup_bound,
    };
    let mut result = picard_run(&reflected, &rts, tol, max_iter, None)?;
    let grid: Vec<f64> = result
        .solution
        .grid()
        .iter()
        .rev()
        .map(|&s| 2.0 * t0 - s)
        .collect();
    let dim = result.solution.dim();
    let mut values = Vec::with_capacity(grid.len() * dim);
    for i in (0..result.solution.len()).rev() {
        values.extend_from_slice(result.solution.value_at(i));
    }
    result.solution = GridFunction::new(grid, values, dim)?;
    Ok(result)
}

/// Sup-norm residual of the integral equation for an arbitrary candidate:
/// `sup_t |candidate(t) - x0 - ∫_{[t0, t] ∩ T} f(s, candidate(s)) Δs|`.
pub fn verify_solution(candidate: &GridFunction, spec: &IvpSpec, ts: &TimeScale) -> Result<f64> {
    let t0 = ts.snap(spec.t0)?;
    if (candidate.first_t() - t0).abs() > MEMBERSHIP_TOL {
        return Err(TsError::InvalidArgument(format!(
            "candidate starts at {}, expected t0 = {t0}",
            candidate.first_t()
        )));
    }
    let window = ts.intersect_window(t0, candidate.last_t())?;
    verify_on_window(candidate, spec, &window)
}

fn verify_on_window(candidate: &GridFunction, spec: &IvpSpec, window: &TimeScale) -> Result<f64> {
    let dim = spec.dim();
    let grid = candidate.grid().to_vec();
    let mut samples = vec![0.0; grid.len() * dim];
    for (i, &g) in grid.iter().enumerate() {
        let v = (spec.f)(g, candidate.value_at(i));
        samples[i * dim..(i + 1) * dim].copy_from_slice(&v);
    }
    let cum = cumulative_integral(window, &grid, &samples, dim);
    let mut defect = 0.0f64;
    for i in 0..grid.len() {
        let mut acc = 0.0;
        for d in 0..dim {
            let r = candidate.value_at(i)[d] - spec.x0[d] - cum[i * dim + d];
            acc += r * r;
        }
        defect = defect.max(acc.sqrt());
    }
    Ok(defect)
}

/// Outcome of a multi-seed uniqueness probe.
#[derive(Debug, Clone)]
pub struct UniquenessProbe {
    /// True when every seeded run converged to the same limit (within
    /// `tol` in sup norm).
    pub agree: bool,
    /// Largest pairwise sup-norm distance between converged limits.
    pub max_pairwise_distance: f64,
    /// Gronwall certificate for Lipschitz problems: `Phi(t0) = 0` and
    /// `Phi <= L ∫ Phi` verified pointwise for every pair, so `Phi ≡ 0`.
    /// `None` when no Lipschitz constant was supplied.
    pub gronwall_certificate: Option<bool>,
    /// One result per seed, in input order.
    pub runs: Vec<PicardResult>,
}

/// Run the Picard iteration from several initial iterates and compare the
/// limits. Lipschitz problems must agree (contraction); agreement failure
/// on a non-Lipschitz problem exhibits genuine non-uniqueness.
pub fn uniqueness_probe(
    spec: &IvpSpec,
    ts: &TimeScale,
    starts: &[StateFn],
    tol: f64,
    max_iter: usize,
) -> Result<UniquenessProbe> {
    if starts.is_empty() {
        return Err(TsError::InvalidArgument(
            "uniqueness_probe needs at least one start".into(),
        ));
    }
    let mut runs = Vec::with_capacity(starts.len());
    for s in starts {
        runs.push(picard_iterate_seeded(spec, ts, tol, max_iter, s)?);
    }
    let mut max_dist = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            max_dist = max_dist.max(runs[i].solution.sup_distance(&runs[j].solution));
        }
    }
    let noise_floor = 10.0 * runs.iter().map(|r| r.final_increment).fold(0.0, f64::max);
    let agree = max_dist <= tol.max(noise_floor);

    let gronwall_certificate = spec.lipschitz.map(|l| {
        let mut ok = agree;
        'outer: for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                if !pairwise_gronwall_ok(&runs[i], &runs[j], l, ts, tol) {
                    ok = false;
                    break 'outer;
                }
            }
        }
        ok
    });

    Ok(UniquenessProbe {
        agree,
        max_pairwise_distance: max_dist,
        gronwall_certificate,
        runs,
    })
}

/// Check `Phi(t0) ≈ 0` and `Phi(t) <= L ∫ Phi + slack` pointwise for the
/// distance function of two converged runs.
fn pairwise_gronwall_ok(
    a: &PicardResult,
    b: &PicardResult,
    lipschitz: f64,
    ts: &TimeScale,
    tol: f64,
) -> bool {
    let grid = a.solution.grid();
    if grid.len() != b.solution.len() {
        return false;
    }
    let phi: Vec<f64> = (0..grid.len())
        .map(|i| euclid_dist(a.solution.value_at(i), b.solution.value_at(i)))
        .collect();
    if phi[0] > tol {
        return false;
    }
    let window = match ts.intersect_window(grid[0], *grid.last().unwrap()) {
        Ok(w) => w,
        Err(_) => return false,
    };
    let cum = cumulative_integral(&window, grid, &phi, 1);
    let slack = 10.0 * tol * (1.0 + lipschitz);
    phi.iter()
        .zip(&cum)
        .all(|(&p, &c)| p <= lipschitz * c + slack)
}

fn resolve_sup_bound(spec: &IvpSpec, ts: &TimeScale) -> Result<(f64, bool)> {
    match spec.sup_bound {
        Some(m) => Ok((m, false)),
        None => Ok((estimate_sup_bound(spec, ts)?, true)),
    }
}

/// Axis lattice over the cube `x0 ± b`, filtered to the Euclidean ball.
fn state_lattice(x0: &[f64], b: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let dim = x0.len();
    let levels: Vec<f64> = (0..per_axis)
        .map(|k| -b + 2.0 * b * k as f64 / (per_axis - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let x: Vec<f64> = x0.iter().zip(&idx).map(|(&c, &k)| c + levels[k]).collect();
        if euclid_dist(&x, x0) <= b * (1.0 + 1e-12) {
            out.push(x);
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < per_axis {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return out;
            }
        }
    }
}

/// Deterministically thin a grid to at most roughly `max_len` points,
/// always keeping the endpoints.
fn thin(grid: &[f64], max_len: usize) -> Vec<f64> {
    if grid.len() <= max_len {
        return grid.to_vec();
    }
    let stride = grid.len().div_ceil(max_len);
    let mut out: Vec<f64> = grid.iter().step_by(stride).copied().collect();
    let last = *grid.last().unwrap();
    if out.last().copied() != Some(last) {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn exp_spec() -> IvpSpec {
        IvpSpec::scalar(|_, x| x, 0.0, 1.0, 1.0, 1.0)
            .unwrap()
            .with_lipschitz(1.0)
            .with_sup_bound(2.0)
    }

    #[test]
    fn sup_bound_estimate_for_linear_field() {
        let ts = TimeScale::reals(-1.0, 1.0, 32).unwrap();
        let spec = IvpSpec::scalar(|_, x| x, 0.0, 1.0, 1.0, 1.0).unwrap();
        let m = estimate_sup_bound(&spec, &ts).unwrap();
        assert!((m - 2.1).abs() < 1e-9, "expected 2 * 1.05, got {m}");
    }

    #[test]
    fn sup_bound_zero_field_gives_full_halfwidth() {
        let ts = TimeScale::reals(-1.0, 1.0, 32).unwrap();
        let spec = IvpSpec::scalar(|_, _| 0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let m = estimate_sup_bound(&spec, &ts).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(existence_halfwidth(&spec, m), 1.0);
    }

    #[test]
    fn sup_bound_sine_field_stays_close_to_one() {
        let ts = TimeScale::reals(-1.0, 1.0, 32).unwrap();
        let spec = IvpSpec::scalar(|_, x| x.sin(), 0.0, 1.0, 1.0, 1.0).unwrap();
        let m = estimate_sup_bound(&spec, &ts).unwrap();
        assert!(m <= 1.05 + 1e-12 && m > 0.8);
    }

    #[test]
    fn halfwidth_formula() {
        let spec = exp_spec();
        assert_eq!(existence_halfwidth(&spec, 2.0), 0.5);
        let narrow = IvpSpec::scalar(|_, x| x, 0.0, 1.0, 0.1, 10.0).unwrap();
        assert_eq!(existence_halfwidth(&narrow, 1.0), 0.1);
    }

    #[test]
    fn solves_exponential_on_reals() {
        let ts = TimeScale::reals(0.0, 0.5, 256).unwrap();
        let mut spec = exp_spec();
        spec.a = 0.5;
        spec.b = 1.0;
        let result = picard_iterate(&spec, &ts, 1e-10, 60).unwrap();
        let v = result.solution.eval_scalar(0.5).unwrap();
        assert!((v - 0.5f64.exp()).abs() < 1e-6, "x(0.5) = {v}");
        assert!(result.defect < 1e-8);
        assert!(result.t0_right_dense); // warning flag, not an error
    }

    #[test]
    fn solves_doubling_recurrence_on_integers() {
        let ts = TimeScale::integers(0.0, 3.0).unwrap();
        let spec = IvpSpec::scalar(|_, x| x, 0.0, 1.0, 3.0, 8.0)
            .unwrap()
            .with_lipschitz(1.0)
            .with_sup_bound(8.0 / 3.0); // h = min(3, b/M) = 3
        let result = picard_iterate(&spec, &ts, 1e-12, 60).unwrap();
        assert!((result.solution.eval_scalar(3.0).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_converges_immediately() {
        let ts = TimeScale::reals(0.0, 1.0, 16).unwrap();
        let spec = IvpSpec::scalar(|_, _| 0.0, 0.0, 2.5, 1.0, 1.0).unwrap();
        let result = picard_iterate(&spec, &ts, 1e-12, 5).unwrap();
        assert_eq!(result.iterations, 1);
        assert_eq!(result.solution.eval_scalar(1.0).unwrap(), 2.5);
    }

    #[test]
    fn increments_stay_under_apriori_bounds() {
        let ts = TimeScale::reals(0.0, 0.5, 128).unwrap();
        let mut spec = exp_spec();
        spec.a = 0.5;
        let result = picard_iterate(&spec, &ts, 1e-12, 60).unwrap();
        assert!(!result.apriori_bounds.is_empty());
        for (inc, bound) in result.increments.iter().zip(&result.apriori_bounds) {
            assert!(inc <= &(bound + 1e-12), "increment {inc} > bound {bound}");
        }
        assert!(result.max_ball_excursion <= spec.b + 1e-9);
    }

    #[test]
    fn apriori_bound_closed_forms() {
        let r = TimeScale::reals(0.0, 1.0, 64).unwrap();
        let b5 = apriori_bound(5, 1.0, 1.0, &r, 0.0, 1.0).unwrap();
        assert!((b5 - 1.0 / 120.0).abs() < 1e-12);
        let z = TimeScale::integers(0.0, 3.0).unwrap();
        let b2 = apriori_bound(2, 1.0, 1.0, &z, 0.0, 3.0).unwrap();
        assert_eq!(b2, 3.0);
    }

    #[test]
    fn no_convergence_is_reported() {
        let ts = TimeScale::reals(0.0, 0.5, 64).unwrap();
        let mut spec = exp_spec();
        spec.a = 0.5;
        assert!(matches!(
            picard_iterate(&spec, &ts, 1e-14, 2),
            Err(TsError::NoConvergence { .. })
        ));
    }

    #[test]
    fn verify_accepts_both_sqrt_solutions_on_reals() {
        let ts = TimeScale::reals(0.0, 1.0, 128).unwrap();
        let spec = IvpSpec::scalar(|_, x: f64| x.max(0.0).sqrt(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let grid = ts.full_grid();
        let zero = GridFunction::from_scalar_fn(grid.clone(), |_| 0.0).unwrap();
        let parabola = GridFunction::from_scalar_fn(grid, |t| t * t / 4.0).unwrap();
        assert!(verify_solution(&zero, &spec, &ts).unwrap() < 1e-12);
        assert!(verify_solution(&parabola, &spec, &ts).unwrap() < 1e-12);
    }

    #[test]
    fn probe_detects_nonuniqueness_of_sqrt_on_reals() {
        let ts = TimeScale::reals(0.0, 1.0, 128).unwrap();
        let spec = IvpSpec::scalar(|_, x: f64| x.max(0.0).sqrt(), 0.0, 0.0, 1.0, 1.0)
            .unwrap()
            .with_sup_bound(1.0);
        let starts: Vec<StateFn> = vec![
            Arc::new(|_| vec![0.0]),
            Arc::new(|t: f64| vec![t * t / 4.0]),
        ];
        let probe = uniqueness_probe(&spec, &ts, &starts, 1e-9, 40).unwrap();
        assert!(!probe.agree);
        assert!(probe.max_pairwise_distance > 0.2);
        assert!(probe.gronwall_certificate.is_none()); // not Lipschitz
    }

    #[test]
    fn probe_confirms_uniqueness_of_sqrt_on_integers() {
        let ts = TimeScale::integers(0.0, 3.0).unwrap();
        let spec = IvpSpec::scalar(|_, x: f64| x.max(0.0).sqrt(), 0.0, 0.0, 3.0, 9.0)
            .unwrap()
            .with_sup_bound(3.0);
        let starts: Vec<StateFn> = vec![
            Arc::new(|_| vec![0.0]),
            Arc::new(|t: f64| vec![t * t / 4.0]),
        ];
        let probe = uniqueness_probe(&spec, &ts, &starts, 1e-9, 40).unwrap();
        assert!(probe.agree, "distance {}", probe.max_pairwise_distance);
        let limit = probe.runs[1].solution.eval_scalar(3.0).unwrap();
        assert!(limit.abs() < 1e-12);
    }

    #[test]
    fn probe_agrees_for_lipschitz_field() {
        let ts = TimeScale::reals(0.0, 0.5, 64).unwrap();
        let spec = IvpSpec::scalar(|_, x| x, 0.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_lipschitz(1.0)
            .with_sup_bound(2.0);
        let starts: Vec<StateFn> = vec![
            Arc::new(|_| vec![1.0]),
            Arc::new(|_| vec![1.5]),
            Arc::new(|t: f64| vec![1.0 + 0.5 * t]),
        ];
        let probe = uniqueness_probe(&spec, &ts, &starts, 1e-9, 60).unwrap();
        assert!(probe.agree);
        assert_eq!(probe.gronwall_certificate, Some(true));
    }

    #[test]
    fn backward_solve_matches_exponential() {
        let ts = TimeScale::reals(-0.5, 0.5, 128).unwrap();
        let spec = IvpSpec::scalar(|_, x| x, 0.0, 1.0, 0.5, 0.9)
            .unwrap()
            .with_lipschitz(1.0)
            .with_sup_bound(1.9);
        let result = picard_iterate_backward(&spec, &ts, 1e-10, 60).unwrap();
        let v = result.solution.eval_scalar(-0.4).unwrap();
        assert!((v - (-0.4f64).exp()).abs() < 1e-6, "x(-0.4) = {v}");
        assert_eq!(result.solution.last_t(), 0.0);
    }

    #[test]
    fn left_domain_with_dishonest_sup_bound() {
        let ts = TimeScale::reals(0.0, 2.0, 64).unwrap();
        // Claim M = 0.1 so h = 2, but the field grows much faster.
        let spec = IvpSpec::scalar(|_, x| 10.0 * x, 0.0, 1.0, 2.0, 0.2)
            .unwrap()
            .with_sup_bound(0.1);
        assert!(matches!(
            picard_iterate(&spec, &ts, 1e-8, 50),
            Err(TsError::LeftDomain { .. })
        ));
    }
}
