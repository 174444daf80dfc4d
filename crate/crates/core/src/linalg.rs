//! Small dense linear algebra: a row-major matrix and a Cholesky factor with
//! the adaptive jitter policy used by every Gaussian-process solve.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, config, Error, Result};
use crate::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0×`cols`
    /// matrix where `cols` cannot be inferred, so use [`Matrix::zeros`] for that.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        // chunks_exact(0) panics, and a zero-column matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("matrix-vector product", self.cols, x.len())?;
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    pub fn mul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        check_len("matrix product", self.cols, other.rows)?;
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * other.get(k, j)).sum()
        }))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &Matrix<T>) -> Result<Self> {
        if self.rows > 0 && below.rows > 0 {
            check_len("vstack columns", self.cols, below.cols)?;
        }
        let cols = if self.rows > 0 { self.cols } else { below.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Ok(Self {
            rows: self.rows + below.rows,
            cols,
            data,
        })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Jitter ladder relative to the mean diagonal: an exact attempt first, then
/// 1e-12 up to 1e-6 in decades.
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cholesky<T> {
    factor: Matrix<T>,
    jitter: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix, escalating diagonal jitter on failure.
    ///
    /// Tries `A` as given, then `A + s·I` for `s = 1e-12·t, 1e-11·t, …, 1e-6·t`
    /// with `t = trace(A)/n`. Fails with [`Error::IllConditioned`] naming the
    /// last jitter tried.
    pub fn factor_with_jitter(a: &Matrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(config(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(factor) = factor_plain(a, T::zero()) {
            return Ok(Self {
                factor,
                jitter: T::zero(),
            });
        }
        let n = a.nrows().max(1);
        let mut scale = a.trace() / T::of(n as f64);
        if !(scale.is_finite() && scale > T::zero()) {
            scale = T::one();
        }
        let mut rel = JITTER_START;
        let mut last = T::zero();
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            last = T::of(rel) * scale;
            if let Some(factor) = factor_plain(a, last) {
                return Ok(Self {
                    factor,
                    jitter: last,
                });
            }
            rel *= 10.0;
        }
        Err(Error::IllConditioned {
            jitter: last.to_f64_lossy(),
        })
    }

    pub fn l(&self) -> &Matrix<T> {
        &self.factor
    }

    /// Diagonal jitter that was added before the factorization succeeded.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        check_len("triangular solve", n, b.len())?;
        let l = &self.factor;
        let mut z = b.to_vec();
        for i in 0..n {
            let row = l.row(i);
            let s = dot(&row[..i], &z[..i]);
            z[i] = (z[i] - s) / row[i];
        }
        Ok(z)
    }

    /// Solves `Lᵀ x = z`.
    pub fn solve_upper(&self, z: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        check_len("triangular solve", n, z.len())?;
        let l = &self.factor;
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = T::zero();
            for k in i + 1..n {
                s += l.get(k, i) * x[k];
            }
            x[i] = (x[i] - s) / l.get(i, i);
        }
        Ok(x)
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let z = self.solve_lower(b)?;
        self.solve_upper(&z)
    }

    /// `log det(L Lᵀ) = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.dim())
            .map(|i| self.factor.get(i, i).ln())
            .sum::<T>()
            * two
    }

    /// `L Lᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.dim();
        let l = &self.factor;
        Matrix::from_fn(n, n, |i, j| {
            let m = i.min(j) + 1;
            dot(&l.row(i)[..m], &l.row(j)[..m])
        })
    }
}

/// Plain Cholesky–Banachiewicz on `A + jitter·I`; `None` if not positive definite.
fn factor_plain<T: Scalar>(a: &Matrix<T>, jitter: T) -> Option<Matrix<T>> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                let d = a.get(i, i) + jitter - s;
                if !(d > T::zero()) || !d.is_finite() {
                    return None;
                }
                l.set(i, i, d.sqrt());
            } else {
                let v = (a.get(i, j) - s) / l.get(j, j);
                if !v.is_finite() {
                    return None;
                }
                l.set(i, j, v);
            }
        }
    }
    Some(l)
}
