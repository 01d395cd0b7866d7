//! Delta calculus: derivative, integral, monomials, the time-scale
//! exponential, transition matrices and the Gronwall–Bellman bound.
//!
//! Every integral-like operation shares one decomposition of the window:
//! scattered points contribute `mu(s) * f(s)`, dense stretches are handled
//! by composite trapezoid quadrature over the canonical grid nodes (or a
//! classical 4th-order step for transition matrices). Splitting a range at
//! a grid node therefore recomposes exactly.

use crate::error::{Result, TsError};
use crate::field::{MatrixField, ScalarField};
use crate::grid::GridFunction;
use crate::linalg::Mat;
use crate::timescale::{TimeScale, MEMBERSHIP_TOL};

/// Tolerance below which `|1 + mu p|` counts as non-regressive.
pub const REGRESSIVITY_TOL: f64 = 1e-10;

/// Largest monomial order the iterated-integral recursion accepts.
pub const MAX_MONOMIAL_ORDER: usize = 30;

/// One quadrature cell between consecutive grid points.
#[derive(Debug, Clone, Copy)]
enum Cell {
    /// `left` is right-scattered with graininess `mu`; the next grid point
    /// is `sigma(left)`.
    Gap { index: usize, mu: f64 },
    /// Both ends lie in the same dense segment.
    Dense { index: usize, width: f64 },
}

fn cells(ts: &TimeScale, grid: &[f64]) -> Vec<Cell> {
    grid.windows(2)
        .enumerate()
        .map(|(i, w)| {
            if ts.is_gap(w[0], w[1]) {
                Cell::Gap {
                    index: i,
                    mu: w[1] - w[0],
                }
            } else {
                Cell::Dense {
                    index: i,
                    width: w[1] - w[0],
                }
            }
        })
        .collect()
}

/// Delta derivative of a sampled function at `t`.
///
/// At a right-scattered point this is the exact jump quotient
/// `(f(sigma(t)) - f(t)) / mu(t)`; at a right-dense point it is the forward
/// difference quotient to the next grid node of `f` inside the same dense
/// segment.
pub fn delta_derivative(f: &GridFunction, ts: &TimeScale, t: f64) -> Result<Vec<f64>> {
    let t = ts.snap(t)?;
    let sigma = ts.sigma(t)?;
    if sigma > t {
        let mu = sigma - t;
        let a = f.eval(t)?;
        let b = f.eval(sigma)?;
        return Ok(a.iter().zip(&b).map(|(x, y)| (y - x) / mu).collect());
    }
    // Right-dense: nearest grid node of f strictly above t, within the
    // same segment.
    let seg_end = ts
        .segments()
        .iter()
        .find(|&&(a, b)| t >= a - MEMBERSHIP_TOL && t <= b + MEMBERSHIP_TOL)
        .map(|&(_, b)| b)
        .unwrap();
    let next = f
        .grid()
        .iter()
        .copied()
        .find(|&g| g > t + MEMBERSHIP_TOL && g <= seg_end + MEMBERSHIP_TOL);
    let next = next.ok_or(TsError::UndefinedAtBoundary { point: t })?;
    let h = next - t;
    let a = f.eval(t)?;
    let b = f.eval(next)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (y - x) / h).collect())
}

/// Running delta integral of node samples along `grid`, starting at 0.
///
/// `samples` holds one `dim`-vector per grid point. The result has the same
/// layout; entry `i` is the integral from `grid[0]` to `grid[i]`.
pub fn cumulative_integral(ts: &TimeScale, grid: &[f64], samples: &[f64], dim: usize) -> Vec<f64> {
    debug_assert_eq!(samples.len(), grid.len() * dim);
    let mut out = vec![0.0; grid.len() * dim];
    for cell in cells(ts, grid) {
        let (i, weights) = match cell {
            Cell::Gap { index, mu } => (index, (mu, 0.0)),
            Cell::Dense { index, width } => (index, (width / 2.0, width / 2.0)),
        };
        for d in 0..dim {
            let contrib = weights.0 * samples[i * dim + d] + weights.1 * samples[(i + 1) * dim + d];
            out[(i + 1) * dim + d] = out[i * dim + d] + contrib;
        }
    }
    out
}

/// Delta integral of a pointwise rule over `[r, t] ∩ T`.
pub fn delta_integral<F>(ts: &TimeScale, r: f64, t: f64, dim: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Vec<f64>,
{
    let r = ts.snap(r)?;
    let t = ts.snap(t)?;
    if r > t {
        return Err(TsError::ReversedRange { r, t });
    }
    if (t - r).abs() <= MEMBERSHIP_TOL {
        return Ok(vec![0.0; dim]);
    }
    let grid = ts.grid(r, t)?;
    let mut samples = Vec::with_capacity(grid.len() * dim);
    for &g in &grid {
        let v = f(g);
        debug_assert_eq!(v.len(), dim);
        samples.extend_from_slice(&v);
    }
    let cum = cumulative_integral(ts, &grid, &samples, dim);
    Ok(cum[(grid.len() - 1) * dim..].to_vec())
}

/// Scalar convenience wrapper around [`delta_integral`].
pub fn delta_integral_scalar<F>(ts: &TimeScale, r: f64, t: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    Ok(delta_integral(ts, r, t, 1, |s| vec![f(s)])?[0])
}

/// Delta integral of a sampled function (linear interpolation rule).
pub fn delta_integral_grid(f: &GridFunction, ts: &TimeScale, r: f64, t: f64) -> Result<Vec<f64>> {
    delta_integral(ts, r, t, f.dim(), |s| {
        f.eval(s)
            .expect("integration stays inside the sampled range")
    })
}

/// Time-scale monomials `h_0 .. h_nmax` evaluated at `(t, t0)`.
///
/// `h_0 = 1` and `h_{n+1}(t, t0)` is the delta integral of `h_n(., t0)`
/// from `t0` to `t`. Each `h_n` restricted to a dense segment is a
/// polynomial, so the recursion is marched in closed form: a Taylor shift
/// across dense stretches (`h_n(w) = sum_j h_{n-j}(u) (w-u)^j / j!`) and the
/// jump update `h_n(sigma(u)) = h_n(u) + mu(u) h_{n-1}(u)` at scattered
/// points. No quadrature error accumulates.
pub fn monomials_upto(nmax: usize, ts: &TimeScale, t: f64, t0: f64) -> Result<Vec<f64>> {
    if nmax > MAX_MONOMIAL_ORDER {
        return Err(TsError::InvalidArgument(format!(
            "monomial order {nmax} exceeds the configured maximum {MAX_MONOMIAL_ORDER}"
        )));
    }
    let t0 = ts.snap(t0)?;
    let t = ts.snap(t)?;
    if t0 > t {
        return Err(TsError::ReversedRange { r: t0, t });
    }
    let mut h = vec![0.0; nmax + 1];
    h[0] = 1.0;
    let mut cur = t0;
    while t - cur > MEMBERSHIP_TOL {
        let (_, seg_b) = *ts
            .segments()
            .iter()
            .find(|&&(a, b)| cur >= a - MEMBERSHIP_TOL && cur <= b + MEMBERSHIP_TOL)
            .expect("march stays inside the time scale");
        if cur < seg_b - MEMBERSHIP_TOL {
            // Dense advance within the segment.
            let w = seg_b.min(t);
            let d = w - cur;
            let mut next = vec![0.0; nmax + 1];
            for n in 0..=nmax {
                let mut acc = 0.0;
                let mut pow = 1.0; // d^j / j!
                for j in 0..=n {
                    acc += h[n - j] * pow;
                    pow *= d / (j + 1) as f64;
                }
                next[n] = acc;
            }
            h = next;
            cur = w;
        } else {
            // Scattered jump to the next segment.
            let sigma = ts.sigma(seg_b)?;
            if sigma <= seg_b {
                break; // window supremum
            }
            let mu = sigma - seg_b;
            for n in (1..=nmax).rev() {
                h[n] += mu * h[n - 1];
            }
            cur = sigma;
        }
    }
    Ok(h)
}

/// Single time-scale monomial `h_n(t, t0)`.
pub fn monomial(n: usize, ts: &TimeScale, t: f64, t0: f64) -> Result<f64> {
    Ok(monomials_upto(n, ts, t, t0)?[n])
}

/// Outcome of a regressivity scan over the window grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressivityReport {
    pub ok: bool,
    /// Grid point witnessing the failure, when `!ok`.
    pub witness: Option<f64>,
    /// `1 + mu p` at the witness (or the worst-margin point when ok).
    pub witness_value: f64,
}

fn regressivity_scan(
    p: &ScalarField,
    ts: &TimeScale,
    accept: impl Fn(f64) -> bool,
) -> RegressivityReport {
    let grid = ts.full_grid();
    let mut worst = f64::INFINITY;
    for cell in cells(ts, &grid) {
        let (g, mu) = match cell {
            Cell::Gap { index, mu } => (grid[index], mu),
            Cell::Dense { .. } => continue, // mu = 0 there, 1 + mu p = 1
        };
        let v = 1.0 + mu * p.eval(g);
        if !accept(v) {
            return RegressivityReport {
                ok: false,
                witness: Some(g),
                witness_value: v,
            };
        }
        worst = worst.min(v.abs());
    }
    RegressivityReport {
        ok: true,
        witness: None,
        witness_value: if worst.is_finite() { worst } else { 1.0 },
    }
}

/// True iff `|1 + mu(t) p(t)|` stays above [`REGRESSIVITY_TOL`] at every
/// grid point; reports a witnessing point otherwise.
pub fn is_regressive(p: &ScalarField, ts: &TimeScale) -> RegressivityReport {
    regressivity_scan(p, ts, |v| v.abs() > REGRESSIVITY_TOL)
}

/// Positive-regressivity variant: requires `1 + mu(t) p(t) > 0`.
pub fn is_positively_regressive(p: &ScalarField, ts: &TimeScale) -> RegressivityReport {
    regressivity_scan(p, ts, |v| v > REGRESSIVITY_TOL)
}

/// Time-scale exponential `e_p(t, t0)`.
///
/// Computed as `exp(∫ p over dense parts) * Π (1 + mu(s) p(s))` over the
/// scattered points of `[t0, t)`. Backward evaluation (`t < t0`) returns the
/// reciprocal along the same data.
pub fn ts_exp(p: &ScalarField, ts: &TimeScale, t: f64, t0: f64) -> Result<f64> {
    let t = ts.snap(t)?;
    let t0 = ts.snap(t0)?;
    if (t - t0).abs() <= MEMBERSHIP_TOL {
        return Ok(1.0);
    }
    if t < t0 {
        return Ok(1.0 / ts_exp(p, ts, t0, t)?);
    }
    let grid = ts.grid(t0, t)?;
    let mut dense_acc = 0.0;
    let mut product = 1.0;
    for cell in cells(ts, &grid) {
        match cell {
            Cell::Gap { index, mu } => {
                let g = grid[index];
                let factor = 1.0 + mu * p.eval(g);
                if factor.abs() <= REGRESSIVITY_TOL {
                    return Err(TsError::NotRegressive {
                        witness: g,
                        value: factor,
                    });
                }
                product *= factor;
            }
            Cell::Dense { index, width } => {
                dense_acc += width / 2.0 * (p.eval(grid[index]) + p.eval(grid[index + 1]));
            }
        }
    }
    Ok(product * dense_acc.exp())
}

/// `e_p` sampled over a whole window grid in one sweep, sharing the exact
/// cell decomposition of [`ts_exp`].
pub fn ts_exp_profile(p: &ScalarField, ts: &TimeScale, grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut dense_acc = 0.0;
    let mut product = 1.0;
    out.push(1.0);
    for cell in cells(ts, grid) {
        match cell {
            Cell::Gap { index, mu } => {
                let g = grid[index];
                let factor = 1.0 + mu * p.eval(g);
                if factor.abs() <= REGRESSIVITY_TOL {
                    return Err(TsError::NotRegressive {
                        witness: g,
                        value: factor,
                    });
                }
                product *= factor;
            }
            Cell::Dense { index, width } => {
                dense_acc += width / 2.0 * (p.eval(grid[index]) + p.eval(grid[index + 1]));
            }
        }
        out.push(product * dense_acc.exp());
    }
    Ok(out)
}

fn rk4_step(a: &MatrixField, x: &Mat, u0: f64, u1: f64) -> Mat {
    let dt = u1 - u0;
    let k1 = a.eval(u0).mul(x);
    let k2 = a.eval(u0 + dt / 2.0).mul(&x.add_scaled(&k1, dt / 2.0));
    let k3 = a.eval(u0 + dt / 2.0).mul(&x.add_scaled(&k2, dt / 2.0));
    let k4 = a.eval(u1).mul(&x.add_scaled(&k3, dt));
    let mut out = x.add_scaled(&k1, dt / 6.0);
    out = out.add_scaled(&k2, dt / 3.0);
    out = out.add_scaled(&k3, dt / 3.0);
    out.add_scaled(&k4, dt / 6.0)
}

/// Transition step over a single grid cell: `Phi(grid[i+1], grid[i])`.
fn transition_cell_step(a: &MatrixField, grid: &[f64], cell: Cell) -> Result<Mat> {
    match cell {
        Cell::Gap { index, mu } => {
            let g = grid[index];
            let step = Mat::identity(a.dim()).add_scaled(&a.eval(g), mu);
            if step.is_numerically_singular() {
                return Err(TsError::SingularStep { point: g });
            }
            Ok(step)
        }
        Cell::Dense { index, .. } => Ok(rk4_step(
            a,
            &Mat::identity(a.dim()),
            grid[index],
            grid[index + 1],
        )),
    }
}

/// State transition matrix `Phi(t, s)` of `X^Δ = A(u) X`, `X(s) = I`.
///
/// Scattered points apply `X(sigma(u)) = (I + mu(u) A(u)) X(u)`; dense cells
/// take one classical 4th-order step each.
pub fn transition_matrix(a: &MatrixField, ts: &TimeScale, t: f64, s: f64) -> Result<Mat> {
    let t = ts.snap(t)?;
    let s = ts.snap(s)?;
    if s > t {
        return Err(TsError::ReversedRange { r: s, t });
    }
    if (t - s).abs() <= MEMBERSHIP_TOL {
        return Ok(Mat::identity(a.dim()));
    }
    let grid = ts.grid(s, t)?;
    let mut x = Mat::identity(a.dim());
    for cell in cells(ts, &grid) {
        x = transition_cell_step(a, &grid, cell)?.mul(&x);
    }
    Ok(x)
}

/// `Phi(grid_end, grid[i])` for every `i`, accumulated in one backward
/// sweep along the grid.
pub fn transition_to_end(a: &MatrixField, ts: &TimeScale, grid: &[f64]) -> Result<Vec<Mat>> {
    let n = grid.len();
    let mut out = vec![Mat::identity(a.dim()); n];
    let cs = cells(ts, grid);
    for i in (0..n.saturating_sub(1)).rev() {
        let step = transition_cell_step(a, grid, cs[i])?;
        out[i] = out[i + 1].mul(&step);
    }
    Ok(out)
}

/// Result of a Gronwall–Bellman check.
#[derive(Debug, Clone)]
pub struct GronwallOutcome {
    /// The bound function `t -> alpha * e_p(t, t0)` on the window grid.
    pub bound: GridFunction,
    /// Whether `y(t) <= alpha + ∫ y p` held pointwise on the grid.
    pub hypothesis_ok: bool,
    /// Worst value of `y - alpha - ∫ y p` over the grid.
    pub worst_hypothesis_excess: f64,
    /// Whether `y <= bound` held pointwise; `None` when the hypothesis
    /// already failed.
    pub conclusion_ok: Option<bool>,
    /// Worst value of `y - bound` over the grid.
    pub worst_conclusion_excess: f64,
}

/// Gronwall–Bellman bound on `[t0, max T]`.
///
/// Requires `p >= 0` and `1 + mu p > 0` on the window. Verifies the
/// hypothesis `y(t) <= alpha + ∫_{t0}^t y p Δs` pointwise on the grid and,
/// when it holds, checks the conclusion `y(t) <= alpha e_p(t, t0)`.
/// A violated hypothesis is reported in the outcome, not as an error.
pub fn gronwall_bound(
    y: &GridFunction,
    p: &ScalarField,
    alpha: f64,
    ts: &TimeScale,
    t0: f64,
) -> Result<GronwallOutcome> {
    if y.dim() != 1 {
        return Err(TsError::InvalidArgument(
            "gronwall_bound expects a scalar grid function".into(),
        ));
    }
    let t0 = ts.snap(t0)?;
    let grid = ts.grid(t0, ts.max())?;
    if is_positively_regressive(p, ts).ok {
        // fall through
    } else {
        return Err(TsError::InvalidArgument(
            "gronwall_bound requires 1 + mu p > 0 on the window".into(),
        ));
    }
    for &g in &grid {
        if p.eval(g) < -1e-12 {
            return Err(TsError::InvalidArgument(format!(
                "gronwall_bound requires p >= 0; p({g}) = {}",
                p.eval(g)
            )));
        }
    }

    let yv: Vec<f64> = grid
        .iter()
        .map(|&g| y.eval_scalar(g))
        .collect::<Result<_>>()?;
    let integrand: Vec<f64> = grid.iter().zip(&yv).map(|(&g, &v)| v * p.eval(g)).collect();
    let running = cumulative_integral(ts, &grid, &integrand, 1);

    let scale = yv.iter().fold(alpha.abs().max(1.0), |m, v| m.max(v.abs()));
    let slack = 1e-10 * scale;

    let mut worst_hyp = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        worst_hyp = worst_hyp.max(yv[i] - alpha - running[i]);
    }
    let hypothesis_ok = worst_hyp <= slack;

    let profile = ts_exp_profile(p, ts, &grid)?;
    let bound_values: Vec<f64> = profile.iter().map(|e| alpha * e).collect();
    let mut worst_conc = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        worst_conc = worst_conc.max(yv[i] - bound_values[i]);
    }
    let bound = GridFunction::new(grid, bound_values, 1)?;
    let conclusion_ok = if hypothesis_ok {
        Some(worst_conc <= slack)
    } else {
        None
    };

    Ok(GronwallOutcome {
        bound,
        hypothesis_ok,
        worst_hypothesis_excess: worst_hyp,
        conclusion_ok,
        worst_conclusion_excess: worst_conc,
    })
}
