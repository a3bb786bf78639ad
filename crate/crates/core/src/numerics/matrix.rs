//! Dense complex matrices, sized for the dimensions that show up in
//! link-level simulation (a few thousand rows at most).

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericFailure("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equal-length vectors as the columns of a matrix.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidDimension("ragged columns".into()));
        }
        Ok(Self::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn column_vector(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows, "column length mismatch");
        for (r, z) in v.iter().enumerate() {
            self[(r, c)] = *z;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Complex64::conj).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(Complex64::norm_sqr)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix product with a dimension check.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidDimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = other.shape();
        Self::from_fn(self.rows * p, self.cols * q, |r, c| {
            self[(r / p, c / q)] * other[(r % p, c % q)]
        })
    }

    /// Concatenates matrices with equal row counts left to right.
    pub fn hconcat(blocks: &[&Self]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::InvalidDimension("hconcat row mismatch".into()));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            for r in 0..rows {
                for c in 0..b.cols {
                    out[(r, offset + c)] = b[(r, c)];
                }
            }
            offset += b.cols;
        }
        Ok(out)
    }

    /// Copies the `cols` columns starting at `start`.
    pub fn columns(&self, start: usize, cols: usize) -> Self {
        Self::from_fn(self.rows, cols, |r, c| self[(r, start + c)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix dimensions must agree")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `aᴴ b` for column vectors.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

/// `n`-point DFT matrix with entry `(a, b) = exp(-i 2π a b / n)`.
pub fn dft_matrix(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "DFT size must be at least 1".into(),
        ));
    }
    Ok(CMatrix::from_fn(n, n, |a, b| {
        // reduce a*b mod n first so large n keeps full phase accuracy
        let k = (a * b) % n;
        Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)
    }))
}

/// Lower Cholesky factor `L` with `A = L Lᴴ`.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidDimension(format!(
            "Cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.frobenius_norm();
    let asym = (a - &a.adjoint()).frobenius_norm();
    if !(asym <= 1e-9 * scale) {
        return Err(Error::NumericFailure(format!(
            "matrix is not Hermitian (asymmetry {asym:.3e}, norm {scale:.3e})"
        )));
    }
    let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 1e-13 * max_diag) || !d.is_finite() {
            return Err(Error::NumericFailure(format!(
                "matrix is not positive definite (pivot {j} = {d:.3e})"
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᴴ X = B` given the Cholesky factor.
pub fn cholesky_solve(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::InvalidDimension(format!(
            "right-hand side has {} rows, expected {n}",
            b.rows()
        )));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
        // backward: Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hermitian_pd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidDimension(
            "coefficient matrix must be square".into(),
        ));
    }
    if a.rows() != b.rows() {
        return Err(Error::InvalidDimension(format!(
            "A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let l = cholesky(a)?;
    cholesky_solve(&l, b)
}

/// Solves a small dense real system `A x = b` by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
pub fn solve_real(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::InvalidDimension("real system shape mismatch".into()));
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if !(m[pivot * n + col].abs() > 1e-14 * scale) {
            return Err(Error::NumericFailure("singular real system".into()));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for k in r + 1..n {
            s -= m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1).unwrap();
        assert_eq!(f1[(0, 0)], c(1.0, 0.0));
        let f2 = dft_matrix(2).unwrap();
        let want = [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
        for (got, w) in f2.as_slice().iter().zip(want) {
            assert!((got - w).norm() < 1e-15);
        }
        assert!(matches!(dft_matrix(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn dft_gram_is_scaled_identity() {
        for n in 1..=64 {
            let f = dft_matrix(n).unwrap();
            let g = &f.adjoint() * &f;
            let want = CMatrix::identity(n).scale_real(n as f64);
            assert!(g.max_abs_diff(&want) < 1e-12 * n as f64, "n = {n}");
        }
    }

    #[test]
    fn solve_identity_and_scalar() {
        let b = CMatrix::from_fn(3, 2, |r, c_| c(r as f64, c_ as f64 - 1.0));
        let x = solve_hermitian_pd(&CMatrix::identity(3), &b).unwrap();
        assert!(x.max_abs_diff(&b) < 1e-15);
        let x = solve_hermitian_pd(&CMatrix::identity(4).scale_real(2.0), &CMatrix::identity(4))
            .unwrap();
        assert!(x.max_abs_diff(&CMatrix::identity(4).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let mut a = CMatrix::identity(2);
        a[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(
            solve_hermitian_pd(&a, &CMatrix::identity(2)),
            Err(Error::NumericFailure(_))
        ));
        let mut b = CMatrix::identity(2);
        b[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(
            solve_hermitian_pd(&b, &CMatrix::identity(2)),
            Err(Error::NumericFailure(_))
        ));
        assert!(matches!(
            solve_hermitian_pd(&CMatrix::identity(2), &CMatrix::identity(3)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn kron_shapes_and_entries() {
        let a = CMatrix::from_fn(2, 1, |r, _| c(r as f64 + 1.0, 0.0));
        let b = CMatrix::from_fn(1, 3, |_, col| c(0.0, col as f64));
        let k = a.kron(&b);
        assert_eq!(k.shape(), (2, 3));
        assert_eq!(k[(1, 2)], c(0.0, 4.0));
    }

    #[test]
    fn real_solver() {
        let x = solve_real(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_real(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_err());
    }
}
