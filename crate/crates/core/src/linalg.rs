//! Dense complex linear algebra for the small operators used throughout the crate.
//!
//! Everything here is row-major and dense. The largest operator in the
//! cloning problem is 63 x 63, so there is no sparse path.
//!
//! Composite spaces follow the standard Kronecker ordering: the leftmost
//! factor is the slowest-varying index. [`kron`], [`partial_trace`] and
//! [`permute_subsystems`] all share that convention.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default absolute tolerance for `|M[i][j] - conj(M[j][i])|`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Default tolerance for calling an operator positive semidefinite.
pub const PSD_TOL: f64 = 1e-8;
/// Default cap on the dimension of a Kronecker product.
pub const MAX_KRON_DIM: usize = 10_000;

const EIG_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kronecker product dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("matrix is not Hermitian: max deviation {deviation:e} exceeds tolerance {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix has non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("traced-out spaces are not a subset of the composite space")]
    NotSubset,
    #[error("eigendecomposition did not converge")]
    EigenNoConvergence,
    #[error("matrix is singular or not positive definite")]
    Singular,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
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
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// `|v><v|`
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `Re Tr(self * other)` without forming the product.
    pub fn re_trace_product(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.cols, other.rows));
        let mut acc = 0.0;
        for i in 0..self.rows {
            for (j, a) in self.row(i).iter().enumerate() {
                let b = other[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// Largest `|M[i][j] - conj(M[j][i])|`; infinite for non-square input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(M + M^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A square complex matrix that is Hermitian up to `hermiticity_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
    hermiticity_tol: f64,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, HERMITICITY_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "Hermitian operator must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if let Some(pos) = matrix
            .as_slice()
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LinalgError::NonFinite {
                row: pos / matrix.cols(),
                col: pos % matrix.cols(),
            });
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > tol {
            return Err(LinalgError::NotHermitian { deviation, tol });
        }
        Ok(Self {
            matrix,
            hermiticity_tol: tol,
        })
    }

    /// Projects onto the Hermitian part. Used for iterates whose asymmetry is
    /// pure rounding.
    pub fn from_hermitian_part(matrix: &ComplexMatrix) -> Self {
        Self {
            matrix: matrix.hermitian_part(),
            hermiticity_tol: HERMITICITY_TOL,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_hermitian_part(&ComplexMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_hermitian_part(&ComplexMatrix::identity(dim))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_hermitian_part(&ComplexMatrix::from_real_diagonal(diag))
    }

    pub fn projector(v: &[Complex64]) -> Self {
        Self::from_hermitian_part(&ComplexMatrix::outer(v))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn hermiticity_tol(&self) -> f64 {
        self.hermiticity_tol
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Entrywise complex conjugate, which is also the transpose for Hermitian input.
    pub fn conj(&self) -> Self {
        Self {
            matrix: self.matrix.conj(),
            hermiticity_tol: self.hermiticity_tol,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
            hermiticity_tol: self.hermiticity_tol,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_hermitian_part(&(&self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_hermitian_part(&(&self.matrix - &other.matrix))
    }

    /// `Tr(self * other)`, real for Hermitian operands.
    pub fn inner(&self, other: &Self) -> f64 {
        self.matrix.re_trace_product(&other.matrix)
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(min_eigenvalue(self)? >= -tol)
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        let data = rows
            .into_iter()
            .flatten()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::from_row_major(n_rows, n_cols, data).map_err(serde::de::Error::custom)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(deserializer)?;
        HermitianOperator::new(m).map_err(serde::de::Error::custom)
    }
}

/// The three tensor factors of the cloning map's Choi matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceLabel {
    /// First output copy, squashed to `{|0>, |1>, |empty>}`.
    Copy1,
    /// Second output copy.
    Copy2,
    /// The bank's seven-dimensional state space.
    Initial,
}

impl SpaceLabel {
    pub const fn dim(self) -> usize {
        match self {
            SpaceLabel::Copy1 | SpaceLabel::Copy2 => 3,
            SpaceLabel::Initial => 7,
        }
    }
}

pub fn kron_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    kron_with_limit(a, b, MAX_KRON_DIM)
}

pub fn kron_with_limit(a: &HermitianOperator, b: &HermitianOperator, max_dim: usize) -> Result<HermitianOperator> {
    let dim = a.dim().checked_mul(b.dim()).ok_or(LinalgError::DimensionOverflow {
        dim: usize::MAX,
        max: max_dim,
    })?;
    if dim > max_dim {
        return Err(LinalgError::DimensionOverflow { dim, max: max_dim });
    }
    Ok(HermitianOperator {
        matrix: kron_matrix(a.matrix(), b.matrix()),
        hermiticity_tol: a.hermiticity_tol.max(b.hermiticity_tol),
    })
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&HermitianOperator]) -> Result<HermitianOperator> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| LinalgError::DimensionMismatch("empty factor list".into()))?;
    rest.iter().try_fold((*first).clone(), |acc, f| kron(&acc, f))
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Partial trace over the subsystems with `keep[k] == false`.
pub fn partial_trace_dims(m: &ComplexMatrix, dims: &[usize], keep: &[bool]) -> Result<ComplexMatrix> {
    if dims.len() != keep.len() {
        return Err(LinalgError::DimensionMismatch(
            "dims and keep mask differ in length".into(),
        ));
    }
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(LinalgError::DimensionMismatch(format!(
            "operator is {}x{} but subsystem dims multiply to {total}",
            m.rows(),
            m.cols()
        )));
    }
    let full_strides = strides(dims);
    let kept_dims: Vec<usize> = dims.iter().zip(keep).filter(|(_, &k)| k).map(|(&d, _)| d).collect();
    let traced_dims: Vec<usize> = dims.iter().zip(keep).filter(|(_, &k)| !k).map(|(&d, _)| d).collect();
    let kept_strides = strides(&kept_dims);
    let traced_strides = strides(&traced_dims);
    let kept_total: usize = kept_dims.iter().product();

    // Split every composite index into (kept index, traced index).
    let split: Vec<(usize, usize)> = (0..total)
        .map(|idx| {
            let (mut ki, mut ti, mut kpos, mut tpos) = (0, 0, 0, 0);
            for (k, (&d, &stride)) in dims.iter().zip(&full_strides).enumerate() {
                let digit = (idx / stride) % d;
                if keep[k] {
                    ki += digit * kept_strides[kpos];
                    kpos += 1;
                } else {
                    ti += digit * traced_strides[tpos];
                    tpos += 1;
                }
            }
            (ki, ti)
        })
        .collect();

    let mut out = ComplexMatrix::zeros(kept_total, kept_total);
    for i in 0..total {
        let (ki, ti) = split[i];
        for j in 0..total {
            let (kj, tj) = split[j];
            if ti == tj {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Traces out `traced_out` from an operator on the composite space `spaces`.
pub fn partial_trace(
    m: &HermitianOperator,
    spaces: &[SpaceLabel],
    traced_out: &[SpaceLabel],
) -> Result<HermitianOperator> {
    if traced_out.iter().any(|t| !spaces.contains(t)) {
        return Err(LinalgError::NotSubset);
    }
    let dims: Vec<usize> = spaces.iter().map(|s| s.dim()).collect();
    let keep: Vec<bool> = spaces.iter().map(|s| !traced_out.contains(s)).collect();
    let out = partial_trace_dims(m.matrix(), &dims, &keep)?;
    Ok(HermitianOperator {
        matrix: out,
        hermiticity_tol: m.hermiticity_tol,
    })
}

/// Reorders tensor factors: output factor `k` is input factor `perm[k]`.
pub fn permute_subsystems(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len()
        || perm
            .iter()
            .any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true))
    {
        return Err(LinalgError::DimensionMismatch("invalid subsystem permutation".into()));
    }
    if !m.is_square() || m.rows() != total {
        return Err(LinalgError::DimensionMismatch(
            "operator dimension does not match subsystem dims".into(),
        ));
    }
    let in_strides = strides(dims);
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let out_strides = strides(&out_dims);
    let map: Vec<usize> = (0..total)
        .map(|idx| {
            perm.iter()
                .enumerate()
                .map(|(k, &p)| ((idx / in_strides[p]) % dims[p]) * out_strides[k])
                .sum()
        })
        .collect();
    let mut out = ComplexMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl Eigen {
    /// `V diag(f(lambda)) V^dagger`
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let scaled = ComplexMatrix::from_fn(n, n, |i, k| v[(i, k)] * f(self.eigenvalues[k]));
        scaled.matmul(&v.adjoint())
    }
}

pub fn eig_hermitian(m: &HermitianOperator) -> Result<Eigen> {
    eig_hermitian_matrix(m.matrix())
}

pub(crate) fn eig_hermitian_matrix(m: &ComplexMatrix) -> Result<Eigen> {
    let n = m.rows();
    if n == 0 {
        return Ok(Eigen {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = m.hermitian_part().to_nalgebra();
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER).ok_or(LinalgError::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(Eigen {
        eigenvalues,
        eigenvectors,
    })
}

pub fn min_eigenvalue(m: &HermitianOperator) -> Result<f64> {
    Ok(eig_hermitian(m)?.eigenvalues.first().copied().unwrap_or(0.0))
}
