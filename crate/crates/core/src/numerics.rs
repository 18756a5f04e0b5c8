//! Dense small-matrix linear algebra.
//!
//! Everything here targets the tiny sizes (n <= 64) this crate needs:
//! Cholesky factorization with a scale-aware pivot tolerance, positive
//! definite log-determinant and inverse, and a one-sided Jacobi SVD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Fails on length mismatch or
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Builds a diagonal matrix from the given entries.
    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// 2x2 planar rotation by `theta` radians.
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { rows: 2, cols: 2, data: vec![c, -s, s, c] }
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> Vector {
        Vector::from_slice(&self.data[i * self.cols..(i + 1) * self.cols])
    }

    pub fn col(&self, j: usize) -> Vector {
        Vector::from_fn(self.rows, |i| self.get(i, j))
    }

    pub fn set_col(&mut self, j: usize, v: &Vector) {
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matvec {}x{} * {}",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self.get(i, j) * v[j];
            }
            out[i] = s;
        }
        Ok(out)
    }

    /// `Aᵀ A` of this matrix.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut s = 0.0;
                for k in 0..self.rows {
                    s += self.get(k, i) * self.get(k, j);
                }
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("elementwise shape mismatch".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// CSV form: one row per line, '.' decimal separator, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> =
                (0..self.cols).map(|j| format_f64(self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::CorruptDocument(format!("bad CSV number: {e}")))?);
        }
        Matrix::from_rows(&rows)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Formats a float so the shortest round-trippable representation is used.
pub(crate) fn format_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("non-finite vector entry".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self { data: s.to_vec() }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Self {
        Self { data: (0..n).map(f).collect() }
    }

    /// Standard basis vector `e_i` of dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v[i] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sq_norm(&self) -> f64 {
        self.dot(self)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector { data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector { data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector { data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn hadamard(&self, other: &Vector) -> Vector {
        Vector { data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect() }
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Vector) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Lower-triangular Cholesky factor with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactor {
    l: Matrix,
}

impl CholeskyFactor {
    /// Wraps a lower-triangular matrix with positive diagonal.
    pub fn new(l: Matrix) -> Result<Self> {
        if l.rows() != l.cols() {
            return Err(Error::DimensionMismatch("Cholesky factor must be square".into()));
        }
        for i in 0..l.rows() {
            if l.get(i, i) <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            for j in (i + 1)..l.cols() {
                if l.get(i, j) != 0.0 {
                    return Err(Error::DomainError("factor has nonzero upper triangle".into()));
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.l.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..=j.min(i) {
                    s += self.l.get(i, k) * self.l.get(j, k);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }

    /// `log |L Lᵀ| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.l.rows()).map(|i| self.l.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &Vector) -> Vector {
        let n = self.l.rows();
        let mut y = Vector::zeros(n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    /// Solves `Lᵀ x = y` by back substitution.
    pub fn solve_upper(&self, y: &Vector) -> Vector {
        let n = self.l.rows();
        let mut x = Vector::zeros(n);
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }
}

/// Thin SVD `A = U diag(S) Vᵀ` with `S` non-increasing and nonnegative.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vector,
    pub v: Matrix,
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// The pivot tolerance is `1e-12 * trace(A)`, so failure is scale-aware.
pub fn cholesky(a: &Matrix) -> Result<CholeskyFactor> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    if !a.is_symmetric(1e-12 * (1.0 + a.frobenius_norm())) {
        return Err(Error::NotSymmetric);
    }
    let n = a.rows();
    let trace = a.trace();
    if trace <= 0.0 && n > 0 {
        return Err(Error::NotPositiveDefinite);
    }
    let tol = 1e-12 * trace;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= tol {
                    return Err(Error::NotPositiveDefinite);
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    CholeskyFactor::new(l)
}

/// `log |A|` for symmetric positive definite `A`.
pub fn log_det_pd(a: &Matrix) -> Result<f64> {
    Ok(cholesky(a)?.log_det())
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn invert_pd(a: &Matrix) -> Result<Matrix> {
    let f = cholesky(a)?;
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let y = f.solve_lower(&Vector::basis(n, j));
        let x = f.solve_upper(&y);
        inv.set_col(j, &x);
    }
    // Symmetrize away the last-bit asymmetry from column-wise solves.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, m);
            inv.set(j, i, m);
        }
    }
    Ok(inv)
}

const JACOBI_SWEEP_CAP: usize = 100;

/// One-sided Jacobi SVD for small matrices (intended for sizes <= 64).
pub fn svd_small(a: &Matrix) -> Result<SvdResult> {
    if a.rows() < a.cols() {
        let t = svd_small(&a.transpose())?;
        return Ok(SvdResult { u: t.v, s: t.s, v: t.u });
    }
    let m = a.rows();
    let n = a.cols();
    let mut b = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let tol = 1e-15 * scale * scale;

    let mut converged = false;
    for _sweep in 0..JACOBI_SWEEP_CAP {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if gamma.abs() <= tol || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    b.set(i, p, c * bp - s * bq);
                    b.set(i, q, s * bp + c * bq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure);
    }

    // Column norms are the singular values; normalized columns are U.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| b.col(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Matrix::zeros(m, n);
    let mut s = Vector::zeros(n);
    let mut vs = Matrix::zeros(n, n);
    let mut deficient: Vec<usize> = Vec::new();
    for (out_j, &j) in order.iter().enumerate() {
        s[out_j] = norms[j];
        vs.set_col(out_j, &v.col(j));
        if norms[j] > 1e-300 {
            u.set_col(out_j, &b.col(j).scale(1.0 / norms[j]));
        } else {
            deficient.push(out_j);
        }
    }
    // Complete U to an orthonormal set for zero singular values.
    for j in deficient {
        let mut candidate = None;
        for e in 0..m {
            let mut w = Vector::basis(m, e);
            for k in 0..n {
                if k == j {
                    continue;
                }
                let proj = u.col(k).dot(&w);
                w.axpy(-proj, &u.col(k));
            }
            if w.norm() > 1e-6 {
                candidate = Some(w.scale(1.0 / w.norm()));
                break;
            }
        }
        let w = candidate.ok_or(Error::ConvergenceFailure)?;
        u.set_col(j, &w);
    }
    Ok(SvdResult { u, s, v: vs })
}
