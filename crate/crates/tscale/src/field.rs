//! Callable coefficient fields over a time scale.

use std::fmt;
use std::sync::Arc;

use crate::linalg::Mat;
use crate::timescale::TimeScale;

/// Right-hand side of a dynamic equation: `(t, x) -> dx`.
pub type Rhs = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// A state-valued function of time, e.g. a delay history or an initial
/// iterate seed.
pub type StateFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Scalar coefficient rule `p(t)`.
///
/// Inputs are assumed rd-continuous; [`ScalarField::spot_check_rd`] samples
/// one-sided limits at segment endpoints rather than verifying exhaustively.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarField {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::new(move |_| c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    /// Sample one-sided limits at dense-segment endpoints and report the
    /// worst observed jump. A q-truncation tag on the time scale is
    /// propagated so callers can honour the quantum-calculus caveat on the
    /// fundamental theorem.
    pub fn spot_check_rd(&self, ts: &TimeScale, jump_tol: f64) -> RdSpotCheck {
        let mut worst = 0.0f64;
        let mut at = ts.min();
        for &(a, b) in ts.segments() {
            if b <= a {
                continue;
            }
            let probe = (b - a) * 1e-7;
            for (e, dir) in [(a, 1.0), (b, -1.0)] {
                let jump = (self.eval(e + dir * probe) - self.eval(e)).abs();
                if jump > worst {
                    worst = jump;
                    at = e;
                }
            }
        }
        RdSpotCheck {
            ok: worst <= jump_tol,
            worst_jump: worst,
            at,
            q_caveat: ts.is_q_truncation(),
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

/// Matrix coefficient rule `A(t)`.
#[derive(Clone)]
pub struct MatrixField {
    f: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    dim: usize,
}

impl MatrixField {
    pub fn new(dim: usize, f: impl Fn(f64) -> Mat + Send + Sync + 'static) -> Self {
        MatrixField {
            f: Arc::new(f),
            dim,
        }
    }

    pub fn constant(m: Mat) -> Self {
        let dim = m.dim();
        MatrixField::new(dim, move |_| m.clone())
    }

    /// Constant scalar (1x1) coefficient.
    pub fn constant_scalar(a: f64) -> Self {
        MatrixField::constant(Mat::scalar(a))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> Mat {
        (self.f)(t)
    }

    /// Entry-wise rd spot check, reported through the worst entry jump.
    pub fn spot_check_rd(&self, ts: &TimeScale, jump_tol: f64) -> RdSpotCheck {
        let mut worst = 0.0f64;
        let mut at = ts.min();
        for &(a, b) in ts.segments() {
            if b <= a {
                continue;
            }
            let probe = (b - a) * 1e-7;
            for (e, dir) in [(a, 1.0), (b, -1.0)] {
                let m0 = self.eval(e);
                let m1 = self.eval(e + dir * probe);
                let jump = m1.add_scaled(&m0, -1.0).frobenius_norm();
                if jump > worst {
                    worst = jump;
                    at = e;
                }
            }
        }
        RdSpotCheck {
            ok: worst <= jump_tol,
            worst_jump: worst,
            at,
            q_caveat: ts.is_q_truncation(),
        }
    }
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MatrixField(..)")
    }
}

/// Result of a rd-continuity spot check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdSpotCheck {
    pub ok: bool,
    pub worst_jump: f64,
    pub at: f64,
    /// Set for q-truncation scales: the fundamental-theorem identity is not
    /// guaranteed there and property checks skip it.
    pub q_caveat: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timescale::TimeScale;

    #[test]
    fn continuous_field_passes_spot_check() {
        let ts = TimeScale::from_segments(vec![(0.0, 0.0), (1.0, 2.0)], 8).unwrap();
        let p = ScalarField::new(|t| t.sin());
        let report = p.spot_check_rd(&ts, 1e-6);
        assert!(report.ok);
        assert!(!report.q_caveat);
    }

    #[test]
    fn jump_inside_segment_is_flagged() {
        let ts = TimeScale::reals(0.0, 2.0, 8).unwrap();
        let p = ScalarField::new(|t| if t > 0.0 { 1.0 } else { 0.0 });
        let report = p.spot_check_rd(&ts, 1e-6);
        assert!(!report.ok);
        assert!(report.worst_jump > 0.5);
    }

    #[test]
    fn q_truncation_caveat_is_recorded() {
        let ts = TimeScale::qscale(2.0, 4).unwrap();
        let p = ScalarField::constant(1.0);
        assert!(p.spot_check_rd(&ts, 1e-6).q_caveat);
    }
}
