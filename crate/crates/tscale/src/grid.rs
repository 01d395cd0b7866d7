//! Vector-valued functions sampled on a time-scale grid.

use std::io::Write;

use crate::error::{Result, TsError};
use crate::timescale::{TimeScale, MEMBERSHIP_TOL};

/// A function sampled on an ordered finite grid of time-scale points,
/// linearly interpolated between neighbouring nodes of dense segments.
/// Evaluation at a grid point returns the stored value exactly.
///
/// Storage is flat: `values[i * dim .. (i + 1) * dim]` is the state at
/// `grid[i]`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(TsError::InvalidArgument("dimension must be >= 1".into()));
        }
        if grid.is_empty() || values.len() != grid.len() * dim {
            return Err(TsError::InvalidArgument(format!(
                "grid/value length mismatch: {} points, {} values, dim {}",
                grid.len(),
                values.len(),
                dim
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TsError::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
        Ok(GridFunction { grid, values, dim })
    }

    /// Sample a vector-valued rule on a grid.
    pub fn from_fn(grid: Vec<f64>, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &t in &grid {
            let v = f(t);
            if v.len() != dim {
                return Err(TsError::InvalidArgument(format!(
                    "rule returned dimension {}, expected {dim}",
                    v.len()
                )));
            }
            values.extend_from_slice(&v);
        }
        Self::new(grid, values, dim)
    }

    /// Sample a scalar rule on a grid.
    pub fn from_scalar_fn(grid: Vec<f64>, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values, 1)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn first_t(&self) -> f64 {
        self.grid[0]
    }

    pub fn last_t(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Stored state at grid index `i`.
    pub fn value_at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_value(&self) -> &[f64] {
        self.value_at(self.len() - 1)
    }

    /// Index of the grid point equal to `t` (within tolerance), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.grid.partition_point(|&g| g < t - MEMBERSHIP_TOL);
        if i < self.grid.len() && (self.grid[i] - t).abs() <= MEMBERSHIP_TOL {
            Some(i)
        } else {
            None
        }
    }

    /// Evaluate at `t`: exact at grid points, linear between neighbours.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if let Some(i) = self.index_of(t) {
            return Ok(self.value_at(i).to_vec());
        }
        if t < self.first_t() - MEMBERSHIP_TOL || t > self.last_t() + MEMBERSHIP_TOL {
            return Err(TsError::OutOfRange { point: t });
        }
        let hi = self.grid.partition_point(|&g| g < t);
        let lo = hi - 1;
        let (t0, t1) = (self.grid[lo], self.grid[hi]);
        let w = (t - t0) / (t1 - t0);
        let a = self.value_at(lo);
        let b = self.value_at(hi);
        Ok(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
    }

    /// Scalar convenience for `dim == 1`.
    pub fn eval_scalar(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[0])
    }

    /// Evaluate honouring the delay-alignment rule: when `t` is not a
    /// time-scale point, use the value at the nearest time-scale point
    /// at or below `t`.
    pub fn eval_floor(&self, ts: &TimeScale, t: f64) -> Result<Vec<f64>> {
        let anchor = ts.floor_point(t).ok_or(TsError::OutOfRange { point: t })?;
        self.eval(anchor)
    }

    /// Largest Euclidean pointwise distance to another function on the
    /// same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            let d = euclid_dist(self.value_at(i), other.value_at(i));
            worst = worst.max(d);
        }
        worst
    }

    /// Concatenate with a continuation whose first grid point coincides with
    /// this function's last one.
    pub fn concat(mut self, next: &GridFunction) -> Result<GridFunction> {
        if next.dim != self.dim {
            return Err(TsError::InvalidArgument("dimension mismatch".into()));
        }
        if (next.first_t() - self.last_t()).abs() > MEMBERSHIP_TOL {
            return Err(TsError::InvalidArgument(format!(
                "concat: pieces not adjacent ({} vs {})",
                self.last_t(),
                next.first_t()
            )));
        }
        self.grid.extend_from_slice(&next.grid[1..]);
        self.values.extend_from_slice(&next.values[next.dim..]);
        GridFunction::new(self.grid, self.values, self.dim)
    }

    /// CSV with header `t,v0,...,v{d-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for j in 0..self.dim {
            write!(w, ",v{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{}", self.grid[i])?;
            for v in self.value_at(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Euclidean norm of a state vector.
pub fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two state vectors.
pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_grid_points_linear_between() {
        let f = GridFunction::from_scalar_fn(vec![0.0, 1.0, 2.0], |t| t * t).unwrap();
        assert_eq!(f.eval_scalar(1.0).unwrap(), 1.0);
        assert_eq!(f.eval_scalar(0.5).unwrap(), 0.5); // lerp of 0 and 1
        assert!(f.eval(3.0).is_err());
    }

    #[test]
    fn eval_floor_uses_lower_neighbour() {
        let ts = TimeScale::from_segments(vec![(0.0, 0.0), (1.0, 2.0)], 4).unwrap();
        let f = GridFunction::from_scalar_fn(vec![0.0, 1.0, 1.5, 2.0], |t| t).unwrap();
        // 0.5 is in the gap: nearest time-scale point at or below is 0.
        assert_eq!(f.eval_floor(&ts, 0.5).unwrap(), vec![0.0]);
        assert_eq!(f.eval_floor(&ts, 1.25).unwrap(), vec![1.25]);
    }

    #[test]
    fn concat_joins_adjacent_pieces() {
        let a = GridFunction::from_scalar_fn(vec![0.0, 1.0], |t| t).unwrap();
        let b = GridFunction::from_scalar_fn(vec![1.0, 2.0], |t| t).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.grid(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn csv_has_documented_header() {
        let f = GridFunction::from_fn(vec![0.0, 1.0], 2, |t| vec![t, -t]).unwrap();
        let csv = f.to_csv_string();
        assert!(csv.starts_with("t,v0,v1\n"));
        assert!(csv.contains("1,1,-1"));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(GridFunction::new(vec![0.0, 0.0], vec![1.0, 1.0], 1).is_err());
        assert!(GridFunction::new(vec![0.0, 1.0], vec![1.0], 1).is_err());
        assert!(GridFunction::new(vec![], vec![], 1).is_err());
    }
}
