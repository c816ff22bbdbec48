use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{dimension, domain, Result};

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting a wrong entry count
    /// or non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dimension!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain!("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(dimension!("ragged rows"));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

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

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diag(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Complex64]) {
        for (i, &z) in col.iter().enumerate() {
            self[(i, j)] = z;
        }
    }

    /// Copy with the strictly lower triangle zeroed.
    pub fn upper_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i.min(self.cols) {
                out[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(dimension!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            ));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(dimension!(
                "solve needs a square system matching the right-hand side"
            ));
        }
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let (piv, piv_abs) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if piv_abs <= 1e-300 * scale || piv_abs == 0.0 {
                return Err(domain!("singular system"));
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                }
                for j in 0..m {
                    b.data.swap(col * m + j, piv * m + j);
                }
            }
            let inv = a[(col, col)].inv();
            for r in col + 1..n {
                let factor = a[(r, col)] * inv;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..m {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = a[(col, col)].inv();
            for j in 0..m {
                let mut acc = b[(col, j)];
                for k in col + 1..n {
                    acc -= a[(col, k)] * b[(k, j)];
                }
                b[(col, j)] = acc * inv;
            }
        }
        Ok(b)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix product. Panics on incompatible shapes; use [`ComplexMatrix::try_mul`]
/// for untrusted input.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
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

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
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

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Square matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` when `‖m − m†‖_max ≤ 1e-12·max(1, ‖m‖_max)` and stores the
    /// exactly symmetrized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(dimension!("Hermitian matrix must be square"));
        }
        let tol = 1e-12 * m.max_abs().max(1.0);
        let n = m.rows();
        for i in 0..n {
            for j in i..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                    return Err(domain!("matrix is not Hermitian at ({i}, {j})"));
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Returns `(m + m†)/2` without any tolerance check. Used for Monte Carlo
    /// averages of Hermitian samples.
    pub fn symmetrize(m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows();
        let mut out = m;
        for i in 0..n {
            out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
            for j in i + 1..n {
                let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = avg;
                out[(j, i)] = avg.conj();
            }
        }
        Self(out)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_diag(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// `U diag(values) U†` for a matrix `U` with orthonormal columns.
    pub fn from_eigen(vectors: &ComplexMatrix, values: &[f64]) -> Self {
        let n = vectors.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = vectors[(i, k)] * v;
                for j in 0..n {
                    out[(i, j)] += a * vectors[(j, k)].conj();
                }
            }
        }
        Self::symmetrize(out)
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

/// Upper triangular factor with a real, non-negative diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular(ComplexMatrix);

impl UpperTriangular {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(dimension!("triangular factor must be square"));
        }
        let n = m.rows();
        for i in 0..n {
            for j in 0..i {
                if m[(i, j)] != Complex64::new(0.0, 0.0) {
                    return Err(domain!("entry ({i}, {j}) below the diagonal is non-zero"));
                }
            }
            let d = m[(i, i)];
            if d.im != 0.0 || d.re < 0.0 {
                return Err(domain!("diagonal entry {i} must be real and non-negative"));
            }
        }
        Ok(Self(m))
    }

    /// Keeps the upper triangle of `m` and rotates the phase of each row so the
    /// diagonal becomes real and non-negative. Row phases cancel in `T†T`, so
    /// the Gram matrix of the result equals that of the plain upper part.
    pub fn from_upper_part(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(dimension!("triangular factor must be square"));
        }
        let mut out = m.upper_part();
        let n = out.rows();
        for i in 0..n {
            let d = out[(i, i)];
            let r = d.norm();
            if r > 0.0 {
                let phase = d.conj() / r;
                for j in i..n {
                    out[(i, j)] *= phase;
                }
            }
            out[(i, i)] = Complex64::new(r, 0.0);
        }
        Ok(Self(out))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `Σ_{i≤j} |T_ij|²`, which equals `tr(T†T)`.
    pub fn gram_trace(&self) -> f64 {
        self.0.data().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s >= 0.0, "scaling a triangular factor by a negative number");
        Self(self.0.scale(s))
    }

    /// Rescaled copy with `tr(T†T) = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.gram_trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(domain!("cannot normalize a zero or non-finite factor"));
        }
        Ok(self.scale(1.0 / tr.sqrt()))
    }
}

impl Index<(usize, usize)> for UpperTriangular {
    type Output = Complex64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}
