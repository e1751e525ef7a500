//! Small dense vector/matrix arithmetic and least-squares solving.
//!
//! Everything downstream works with designs of at most a handful of columns,
//! so this module favours clarity and tight conditioning diagnostics over
//! large-scale performance. Least squares goes through a Householder QR
//! factorization rather than the normal equations; the reciprocal condition
//! number of the triangular factor gates both rank-deficiency and singularity
//! errors at `RCOND_MIN`.

use crate::error::{Error, Result};

/// Reciprocal-condition floor below which designs are treated as rank
/// deficient and square matrices as singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf and shape
    /// mismatches.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {bad}")));
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
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
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

    pub fn mat_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
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

    pub fn mat_vec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let data = (0..self.rows)
            .map(|i| dot(self.row(i), v.as_slice()))
            .collect();
        Ok(Vector { data })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix add".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix sub".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// `(M + M^T) / 2`; removes rounding asymmetry before PSD checks.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, m);
                out.set(j, i, m);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {bad}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch("vector dot".into()));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch("vector sub".into()));
        }
        Ok(Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector { data: self.data.iter().map(|v| c * v).collect() }
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Householder QR factorization of an n x p matrix with n >= p.
///
/// Stores the Householder vectors below the diagonal (`factors`) and the
/// diagonal of R separately. `rcond` is the exact 1-norm reciprocal condition
/// number of the triangular factor, computed from an explicit triangular
/// inverse (cheap at these sizes).
struct QrFactor {
    factors: Matrix,
    r_diag: Vec<f64>,
    rcond: f64,
}

fn qr_factorize(a: &Matrix) -> QrFactor {
    let n = a.rows();
    let p = a.cols();
    debug_assert!(n >= p);
    let mut m = a.clone();
    let mut r_diag = vec![0.0; p];

    for k in 0..p {
        let mut norm_sq = 0.0;
        for i in k..n {
            let v = m.get(i, k);
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            r_diag[k] = 0.0;
            continue;
        }
        let alpha = if m.get(k, k) >= 0.0 { -norm } else { norm };
        // Householder vector v = x - alpha*e1 overwrites the column.
        m.set(k, k, m.get(k, k) - alpha);
        let mut v_dot = 0.0;
        for i in k..n {
            let v = m.get(i, k);
            v_dot += v * v;
        }
        r_diag[k] = alpha;
        if v_dot == 0.0 {
            continue;
        }
        for j in (k + 1)..p {
            let mut proj = 0.0;
            for i in k..n {
                proj += m.get(i, k) * m.get(i, j);
            }
            let c = 2.0 * proj / v_dot;
            for i in k..n {
                let upd = m.get(i, j) - c * m.get(i, k);
                m.set(i, j, upd);
            }
        }
    }

    let rcond = triangular_rcond(&m, &r_diag);
    QrFactor { factors: m, r_diag, rcond }
}

/// 1-norm reciprocal condition number of the upper-triangular factor.
fn triangular_rcond(factors: &Matrix, r_diag: &[f64]) -> f64 {
    let p = r_diag.len();
    if p == 0 {
        return 1.0;
    }
    if r_diag.contains(&0.0) {
        return 0.0;
    }
    let r_entry = |i: usize, j: usize| -> f64 {
        if i == j {
            r_diag[i]
        } else {
            factors.get(i, j)
        }
    };
    // Column 1-norms of R.
    let mut norm_r: f64 = 0.0;
    for j in 0..p {
        let s: f64 = (0..=j).map(|i| r_entry(i, j).abs()).sum();
        norm_r = norm_r.max(s);
    }
    // Explicit inverse of R by back substitution on unit vectors.
    let mut norm_rinv: f64 = 0.0;
    for j in 0..p {
        let mut col = vec![0.0; p];
        col[j] = 1.0;
        for i in (0..=j).rev() {
            let mut s = col[i];
            for k in (i + 1)..=j {
                s -= r_entry(i, k) * col[k];
            }
            col[i] = s / r_diag[i];
        }
        let s: f64 = col.iter().take(j + 1).map(|v| v.abs()).sum();
        norm_rinv = norm_rinv.max(s);
        if !norm_rinv.is_finite() {
            return 0.0;
        }
    }
    1.0 / (norm_r * norm_rinv)
}

/// Applies the stored Householder reflections to `rhs` (i.e. computes Q^T rhs).
fn apply_q_transpose(qr: &QrFactor, rhs: &mut [f64]) {
    let n = qr.factors.rows();
    let p = qr.factors.cols();
    for k in 0..p {
        let mut v_dot = 0.0;
        for i in k..n {
            let v = qr.factors.get(i, k);
            v_dot += v * v;
        }
        if v_dot == 0.0 {
            continue;
        }
        let mut proj = 0.0;
        for i in k..n {
            proj += qr.factors.get(i, k) * rhs[i];
        }
        let c = 2.0 * proj / v_dot;
        for i in k..n {
            rhs[i] -= c * qr.factors.get(i, k);
        }
    }
}

fn back_substitute(qr: &QrFactor, rhs: &[f64]) -> Vec<f64> {
    let p = qr.r_diag.len();
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..p {
            s -= qr.factors.get(i, k) * x[k];
        }
        x[i] = s / qr.r_diag[i];
    }
    x
}

/// Minimum-residual solution of `design * x = response` via Householder QR.
///
/// Fails with `RankDeficient` when the triangular factor's reciprocal
/// condition number drops below [`RCOND_MIN`], which in this codebase signals
/// collinear covariates or a degenerate prognostic score.
pub fn solve_least_squares(design: &Matrix, response: &Vector) -> Result<Vector> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, response has {}",
            response.len()
        )));
    }
    if n < p {
        return Err(Error::RankDeficient(format!(
            "{n} observations for {p} parameters"
        )));
    }
    let qr = qr_factorize(design);
    if qr.rcond < RCOND_MIN {
        return Err(Error::RankDeficient(format!(
            "reciprocal condition number {:.3e} below {RCOND_MIN:.0e}",
            qr.rcond
        )));
    }
    let mut rhs = response.as_slice().to_vec();
    apply_q_transpose(&qr, &mut rhs);
    let x = back_substitute(&qr, &rhs);
    Vector::new(x)
}

/// Inverse of a square matrix via QR, failing with `Singular` below
/// [`RCOND_MIN`].
pub fn invert(m: &Matrix) -> Result<Matrix> {
    let p = m.rows();
    if m.cols() != p {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let qr = qr_factorize(m);
    if qr.rcond < RCOND_MIN {
        return Err(Error::Singular(format!(
            "reciprocal condition number {:.3e} below {RCOND_MIN:.0e}",
            qr.rcond
        )));
    }
    let mut out = Matrix::zeros(p, p);
    for j in 0..p {
        let mut rhs = vec![0.0; p];
        rhs[j] = 1.0;
        apply_q_transpose(&qr, &mut rhs);
        let col = back_substitute(&qr, &rhs);
        for i in 0..p {
            out.set(i, j, col[i]);
        }
    }
    if !out.is_finite() {
        return Err(Error::Singular("inverse has non-finite entries".into()));
    }
    Ok(out)
}

/// Quadratic form `e^T m e`.
pub fn quadratic_form(e: &Vector, m: &Matrix) -> Result<f64> {
    if m.rows() != m.cols() || m.rows() != e.len() {
        return Err(Error::DimensionMismatch(format!(
            "quadratic form of {}-vector with {}x{} matrix",
            e.len(),
            m.rows(),
            m.cols()
        )));
    }
    let mut acc = 0.0;
    for i in 0..e.len() {
        let ei = e.get(i);
        if ei == 0.0 {
            continue;
        }
        acc += ei * dot(m.row(i), e.as_slice());
    }
    Ok(acc)
}
