//! Small dense complex Hermitian matrices.
//!
//! Everything here is sized for `n_T` in the single digits to low tens, so
//! matrices are stored row-major in a flat `Vec` and factored from scratch.

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense `n x n` Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl HermitianMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    /// Builds a matrix from `f(row, col)`. The caller is responsible for
    /// supplying Hermitian entries; see [`HermitianMatrix::is_hermitian`].
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self += weight * v v^H`.
    pub fn add_rank_one(&mut self, weight: f64, v: &[C64]) {
        debug_assert_eq!(v.len(), self.dim);
        if weight == 0.0 {
            return;
        }
        let n = self.dim;
        for i in 0..n {
            let vi = v[i] * weight;
            let row = &mut self.data[i * n..(i + 1) * n];
            for (entry, vj) in row.iter_mut().zip(v) {
                *entry += vi * vj.conj();
            }
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        let scale = self.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
        (0..n)
            .all(|i| (i..n).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol * scale))
    }

    /// `v^H A v` (real for Hermitian `A`).
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let av: C64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
            acc += v[i].conj() * av;
        }
        acc.re
    }

    /// Lower-triangular Cholesky factor `A = L L^H`.
    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        let n = self.dim;
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut diag = self.get(j, j).re;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite {
                    pivot: j,
                    value: diag,
                });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = C64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Cholesky { dim: n, lower: l })
    }
}

/// Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<C64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Natural log of the determinant.
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].re.ln())
            .sum::<f64>()
            * 2.0
    }

    /// `L^{-1} b` by forward substitution.
    pub fn whiten(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * y[k];
            }
            y[i] = s / self.lower[i * n + i].re;
        }
        y
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim;
        let mut x = self.whiten(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i].conj() * x[k];
            }
            x[i] = s / self.lower[i * n + i].re;
        }
        x
    }

    /// `b^H A^{-1} b`, evaluated as `||L^{-1} b||^2`.
    pub fn inverse_quadratic(&self, b: &[C64]) -> f64 {
        norm_sqr(&self.whiten(b))
    }
}
