//! Small dense real linear algebra: row-major matrices and Cholesky.
//!
//! Every covariance handled by the detectors is symmetric positive definite
//! and at most a few hundred rows, so a plain Cholesky with triangular
//! solves is all that is needed.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    pub fn add_diagonal(&mut self, v: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] = self[(i, i)] + v;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in 0..r {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product with eight interleaved partial sums so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm1<T: Real>(a: &[T]) -> T {
    a.iter().map(|v| v.abs()).sum()
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Dimension(format!(
                "Cholesky of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let d = a[(j, j)] - dot(lj, lj);
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: d.to_f64().unwrap_or(f64::NAN),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let s = a[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// `log |A|` from the factor diagonal.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.dim())
            .map(|i| self.lower[(i, i)].ln())
            .sum::<T>()
            * two
    }

    /// Solves `L w = b` in place.
    pub fn forward_solve(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = self.lower.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ u = w` in place.
    pub fn backward_solve(&self, w: &mut [T]) {
        let n = self.dim();
        assert_eq!(w.len(), n);
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in i + 1..n {
                s = s - self.lower[(k, i)] * w[k];
            }
            w[i] = s / self.lower[(i, i)];
        }
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.backward_solve(&mut x);
        x
    }

    /// Solves `L W = B` for every column of the row-major `B` in place.
    pub fn forward_solve_columns(&self, b: &mut Matrix<T>) {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let k = b.cols();
        for i in 0..n {
            for j in 0..i {
                let lij = self.lower[(i, j)];
                if lij == T::zero() {
                    continue;
                }
                let (head, tail) = b.data.split_at_mut(i * k);
                let src = &head[j * k..(j + 1) * k];
                for (t, &s) in tail[..k].iter_mut().zip(src) {
                    *t = *t - lij * s;
                }
            }
            let inv = T::one() / self.lower[(i, i)];
            for t in b.row_mut(i) {
                *t = *t * inv;
            }
        }
    }

    /// `L⁻¹`, lower triangular.
    pub fn inverse_lower(&self) -> Matrix<T> {
        let mut out = Matrix::identity(self.dim());
        self.forward_solve_columns(&mut out);
        out
    }

    /// Dense `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let li = self.inverse_lower().transpose();
        // Row r of `li` is column r of L⁻¹, nonzero from index r on.
        let mut out = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..=r {
                let v = dot(&li.row(r)[r..], &li.row(c)[r..]);
                out[(r, c)] = v;
                out[(c, r)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix<f64> {
        let b = Matrix::from_fn(n, n, |r, c| ((r * 7 + c * 3) % 5) as f64 - 1.5);
        let mut a = b.matmul(&b.transpose()).unwrap();
        a.add_diagonal(n as f64);
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(6);
        let ch = Cholesky::factor(&a).unwrap();
        let l = ch.lower();
        let back = l.matmul(&l.transpose()).unwrap();
        assert!(back.frobenius_distance(&a) < 1e-10);
    }

    #[test]
    fn solve_and_log_det() {
        let a = spd(5);
        let ch = Cholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let x = ch.solve(&b);
        let ax = a.mat_vec(&x).unwrap();
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let d = Matrix::from_fn(3, 3, |r, c| if r == c { (r + 2) as f64 } else { 0.0 });
        let ld = Cholesky::factor(&d).unwrap().log_det();
        assert!((ld - (24f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_columns_matches_vector_solve() {
        let a = spd(4);
        let ch = Cholesky::factor(&a).unwrap();
        let mut b = Matrix::from_fn(4, 3, |r, c| (r as f64) - (c as f64) * 0.5);
        let cols: Vec<Vec<f64>> = (0..3).map(|c| b.column(c)).collect();
        ch.forward_solve_columns(&mut b);
        for (c, col) in cols.into_iter().enumerate() {
            let mut v = col;
            ch.forward_solve(&mut v);
            for r in 0..4 {
                assert!((v[r] - b[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = Matrix::<f64>::identity(3);
        a[(2, 2)] = -1.0;
        assert!(matches!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { pivot: 2, .. })
        ));
    }
}
