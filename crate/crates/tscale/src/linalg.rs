//! Small dense square matrices for transition-matrix stepping.
//!
//! State dimensions in this crate are tiny (typically 1–4), so a plain
//! row-major `Vec<f64>` beats pulling in a full linear-algebra stack.

use crate::error::{Result, TsError};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(TsError::InvalidArgument("matrix must be square".into()));
        }
        Ok(Mat {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// 1x1 matrix, the scalar case.
    pub fn scalar(a: f64) -> Self {
        Mat {
            n: 1,
            data: vec![a],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len());
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Mat, c: f64) -> Mat {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        Mat { n: self.n, data }
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Spectral norm (largest singular value) by power iteration on
    /// `A^T A`, to absolute/relative tolerance `tol`.
    pub fn spectral_norm(&self, tol: f64) -> f64 {
        let n = self.n;
        if n == 1 {
            return self.data[0].abs();
        }
        // B = A^T A, symmetric positive semidefinite.
        let mut b = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[k * n + i] * self.data[k * n + j];
                }
                b.data[i * n + j] = acc;
            }
        }
        // Deterministic start with all modes excited.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0)).collect();
        let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0f64;
        for _ in 0..500 {
            let w = b.matvec(&v);
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            v = w.iter().map(|x| x / nw).collect();
            if (next - lambda).abs() <= tol * next.abs().max(1.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.max(0.0).sqrt()
    }

    /// Determinant magnitude check via LU with partial pivoting; true when
    /// a pivot collapses relative to the matrix scale.
    pub fn is_numerically_singular(&self) -> bool {
        let n = self.n;
        let scale = self.frobenius_norm().max(1.0);
        let mut a = self.data.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs();
            for row in col + 1..n {
                let v = a[row * n + col].abs();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best <= 1e-12 * scale {
                return true;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for row in col + 1..n {
                let f = a[row * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[row * n + j] -= f * a[col * n + j];
                }
            }
        }
        false
    }
}
