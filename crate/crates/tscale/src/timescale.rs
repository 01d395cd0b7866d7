//! Bounded windows of arbitrary time scales.
//!
//! A time scale is a nonempty closed subset of the real line. This module
//! represents a bounded window of one as a finite union of disjoint closed
//! segments `[a_i, b_i]`; a degenerate segment (`a_i == b_i`) encodes an
//! isolated point. All structural queries (forward/backward jump, graininess,
//! point classification, grid enumeration) derive from the segment list.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TsError};

/// Absolute tolerance for membership and point-identity tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A bounded window of a time scale.
///
/// Immutable after construction; all queries are pure, so values can be
/// shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    segments: Vec<(f64, f64)>,
    resolution: usize,
    q_truncation: bool,
}

/// Classification of a point relative to its neighbours in the time scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointClass {
    pub right_scattered: bool,
    pub left_scattered: bool,
    pub is_supremum: bool,
    pub is_infimum: bool,
}

impl PointClass {
    pub fn is_right_dense(&self) -> bool {
        !self.right_scattered
    }

    pub fn is_left_dense(&self) -> bool {
        !self.left_scattered
    }

    /// Isolated: scattered on both sides.
    pub fn is_isolated(&self) -> bool {
        self.right_scattered && self.left_scattered
    }
}

/// Serde shape for constructing a [`TimeScale`] from a config document,
/// e.g. `{"segments": [[0,0],[1,2]], "resolution": 64}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeScaleConfig {
    pub segments: Vec<[f64; 2]>,
    pub resolution: usize,
    #[serde(default)]
    pub q_truncation: bool,
}

impl TryFrom<TimeScaleConfig> for TimeScale {
    type Error = TsError;

    fn try_from(cfg: TimeScaleConfig) -> Result<TimeScale> {
        let segs = cfg.segments.iter().map(|s| (s[0], s[1])).collect();
        let mut ts = TimeScale::from_segments(segs, cfg.resolution)?;
        ts.q_truncation = cfg.q_truncation;
        Ok(ts)
    }
}

impl TimeScale {
    /// Build from an explicit segment list.
    ///
    /// Segments must be sorted strictly ascending and pairwise disjoint
    /// (`b_i < a_{i+1}`); each must satisfy `a_i <= b_i`. `resolution` is the
    /// number of internal quadrature nodes per non-degenerate segment and
    /// must be at least 2 when any non-degenerate segment is present.
    pub fn from_segments(segments: Vec<(f64, f64)>, resolution: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(TsError::InvalidArgument(
                "time scale needs at least one segment".into(),
            ));
        }
        let mut has_dense = false;
        for (i, &(a, b)) in segments.iter().enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(TsError::InvalidArgument(
                    "segment endpoints must be finite".into(),
                ));
            }
            if a > b {
                return Err(TsError::InvalidArgument(format!(
                    "segment [{a}, {b}] is reversed"
                )));
            }
            if a < b {
                has_dense = true;
            }
            if i + 1 < segments.len() && b >= segments[i + 1].0 {
                return Err(TsError::InvalidArgument(format!(
                    "segments must be disjoint and ascending: [{a}, {b}] overlaps the next"
                )));
            }
        }
        if has_dense && resolution < 2 {
            return Err(TsError::InvalidArgument(
                "resolution must be >= 2 for non-degenerate segments".into(),
            ));
        }
        Ok(TimeScale {
            segments,
            resolution: resolution.max(2),
            q_truncation: false,
        })
    }

    /// Real interval `[a, b]` as a single dense segment.
    pub fn reals(a: f64, b: f64, resolution: usize) -> Result<Self> {
        if a >= b {
            return Err(TsError::InvalidArgument(format!(
                "reals({a}, {b}): need a < b"
            )));
        }
        Self::from_segments(vec![(a, b)], resolution)
    }

    /// Integer lattice points of `[a, b]`.
    pub fn integers(a: f64, b: f64) -> Result<Self> {
        let lo = a.ceil() as i64;
        let hi = b.floor() as i64;
        if lo > hi {
            return Err(TsError::EmptyIntersection { a, b });
        }
        let segs = (lo..=hi).map(|n| (n as f64, n as f64)).collect();
        Self::from_segments(segs, 2)
    }

    /// Truncated quantum scale `{q^n : n = 0..=nmax} ∪ {0}` for `q > 0`,
    /// `q != 1`. The window is bounded, so the truncation is exact; the
    /// result carries a tag so callers can honour the q-calculus caveat on
    /// the fundamental theorem of calculus.
    pub fn qscale(q: f64, nmax: u32) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 || (q - 1.0).abs() < MEMBERSHIP_TOL {
            return Err(TsError::InvalidArgument(format!(
                "qscale requires q > 0 and q != 1, got {q}"
            )));
        }
        let mut pts: Vec<f64> = (0..=nmax).map(|n| q.powi(n as i32)).collect();
        pts.push(0.0);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup_by(|x, y| (*x - *y).abs() <= MEMBERSHIP_TOL);
        let segs = pts.into_iter().map(|p| (p, p)).collect();
        let mut ts = Self::from_segments(segs, 2)?;
        ts.q_truncation = true;
        Ok(ts)
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Same window with a different dense-segment resolution.
    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        let mut ts = Self::from_segments(self.segments.clone(), resolution)?;
        ts.q_truncation = self.q_truncation;
        Ok(ts)
    }

    /// True for finite truncations of a q-scale that include 0. The
    /// fundamental-theorem identity is not trusted on such scales (the
    /// q-integral counterpart fails in general), so property checks skip it.
    pub fn is_q_truncation(&self) -> bool {
        self.q_truncation
    }

    /// Smallest point of the window.
    pub fn min(&self) -> f64 {
        self.segments[0].0
    }

    /// Largest point of the window.
    pub fn max(&self) -> f64 {
        self.segments[self.segments.len() - 1].1
    }

    /// Index of the segment containing `t`, if any.
    fn segment_index(&self, t: f64) -> Option<usize> {
        // Binary search on segment starts, then tolerance check.
        let mut lo = 0usize;
        let mut hi = self.segments.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.segments[mid].0 <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        // Candidates: the segment starting at or before t, and the next one
        // (t may sit within tolerance below its start).
        for idx in [lo.wrapping_sub(1), lo] {
            if let Some(&(a, b)) = self.segments.get(idx) {
                if t >= a - MEMBERSHIP_TOL && t <= b + MEMBERSHIP_TOL {
                    return Some(idx);
                }
            }
        }
        None
    }

    /// Membership within the absolute tolerance.
    pub fn contains(&self, t: f64) -> bool {
        self.segment_index(t).is_some()
    }

    /// Snap `t` onto the represented set: exact endpoint value when within
    /// tolerance of one, otherwise `t` itself (interior of a dense segment).
    pub fn snap(&self, t: f64) -> Result<f64> {
        let idx = self
            .segment_index(t)
            .ok_or(TsError::PointNotInTimeScale { point: t })?;
        let (a, b) = self.segments[idx];
        if (t - a).abs() <= MEMBERSHIP_TOL {
            Ok(a)
        } else if (t - b).abs() <= MEMBERSHIP_TOL {
            Ok(b)
        } else {
            Ok(t)
        }
    }

    /// Forward jump `sigma(t) = inf { s in T : s > t }`, with the convention
    /// `sigma(max T) = max T`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        let t = self.snap(t)?;
        let idx = self.segment_index(t).unwrap();
        let (_, b) = self.segments[idx];
        if t < b {
            // Interior or left endpoint of a dense segment: right-dense.
            Ok(t)
        } else if idx + 1 < self.segments.len() {
            Ok(self.segments[idx + 1].0)
        } else {
            Ok(t)
        }
    }

    /// Backward jump `rho(t) = sup { s in T : s < t }`, with
    /// `rho(min T) = min T`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let t = self.snap(t)?;
        let idx = self.segment_index(t).unwrap();
        let (a, _) = self.segments[idx];
        if t > a {
            Ok(t)
        } else if idx > 0 {
            Ok(self.segments[idx - 1].1)
        } else {
            Ok(t)
        }
    }

    /// Graininess `mu(t) = sigma(t) - t`.
    pub fn mu(&self, t: f64) -> Result<f64> {
        let t = self.snap(t)?;
        Ok(self.sigma(t)? - t)
    }

    /// Classify `t` against its neighbours.
    pub fn classify(&self, t: f64) -> Result<PointClass> {
        let t = self.snap(t)?;
        let s = self.sigma(t)?;
        let r = self.rho(t)?;
        Ok(PointClass {
            right_scattered: s > t,
            left_scattered: r < t,
            is_supremum: (t - self.max()).abs() <= MEMBERSHIP_TOL,
            is_infimum: (t - self.min()).abs() <= MEMBERSHIP_TOL,
        })
    }

    /// All quadrature nodes of the window `[a, b] ∩ T`, strictly increasing.
    ///
    /// Contains every isolated point and segment endpoint in the window plus
    /// the canonical internal nodes of each dense segment. Internal nodes are
    /// uniformly spaced over the *original* segment, so grids of overlapping
    /// windows share nodes and range-split integrals recompose exactly.
    pub fn grid(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if a > b + MEMBERSHIP_TOL {
            return Err(TsError::EmptyIntersection { a, b });
        }
        let mut out = Vec::new();
        for &(sa, sb) in &self.segments {
            let lo = sa.max(a);
            let hi = sb.min(b);
            if lo > hi + MEMBERSHIP_TOL {
                continue;
            }
            let lo = if (lo - sa).abs() <= MEMBERSHIP_TOL {
                sa
            } else {
                lo
            };
            let hi = if (hi - sb).abs() <= MEMBERSHIP_TOL {
                sb
            } else {
                hi
            };
            push_point(&mut out, lo);
            if sb > sa {
                let step = (sb - sa) / (self.resolution + 1) as f64;
                let j0 = (((lo - sa) / step).floor() as i64).max(0);
                let j1 = (((hi - sa) / step).ceil() as i64).min(self.resolution as i64 + 1);
                for j in j0..=j1 {
                    let node = sa + j as f64 * step;
                    if node > lo + MEMBERSHIP_TOL && node < hi - MEMBERSHIP_TOL {
                        push_point(&mut out, node);
                    }
                }
                if hi > lo {
                    push_point(&mut out, hi);
                }
            }
        }
        if out.is_empty() {
            return Err(TsError::EmptyIntersection { a, b });
        }
        Ok(out)
    }

    /// Grid over the whole window.
    pub fn full_grid(&self) -> Vec<f64> {
        self.grid(self.min(), self.max())
            .expect("window is nonempty by construction")
    }

    /// New time scale equal to `self ∩ [a, b]`.
    ///
    /// The clipped dense segments become segments of the result in their own
    /// right (each again carrying `resolution` internal nodes); idempotent
    /// for a fixed window.
    pub fn intersect_window(&self, a: f64, b: f64) -> Result<TimeScale> {
        if a > b {
            return Err(TsError::InvalidArgument(format!(
                "intersect_window({a}, {b}): need a <= b"
            )));
        }
        let mut segs = Vec::new();
        for &(sa, sb) in &self.segments {
            let lo = sa.max(a);
            let hi = sb.min(b);
            if lo <= hi {
                segs.push((lo, hi));
            }
        }
        if segs.is_empty() {
            return Err(TsError::EmptyIntersection { a, b });
        }
        let mut ts = TimeScale::from_segments(segs, self.resolution)?;
        ts.q_truncation = self.q_truncation;
        Ok(ts)
    }

    /// Largest time-scale point `<= t`, if any.
    pub fn floor_point(&self, t: f64) -> Option<f64> {
        if let Ok(s) = self.snap(t) {
            return Some(s);
        }
        let mut best: Option<f64> = None;
        for &(a, b) in &self.segments {
            if a > t {
                break;
            }
            best = Some(b.min(t).max(a));
        }
        best
    }

    /// True when two consecutive grid points span a gap of the time scale
    /// (i.e. `g` is right-scattered and `g_next == sigma(g)`), as opposed to
    /// lying in the same dense segment.
    pub fn is_gap(&self, g: f64, g_next: f64) -> bool {
        match (self.segment_index(g), self.segment_index(g_next)) {
            (Some(i), Some(j)) => i != j,
            _ => false,
        }
    }
}

fn push_point(out: &mut Vec<f64>, p: f64) {
    if let Some(&last) = out.last() {
        if (p - last).abs() <= MEMBERSHIP_TOL {
            return;
        }
        debug_assert!(p > last);
    }
    out.push(p);
}
