//! Dense complex linear algebra: Hermitian eigendecomposition, functional
//! calculus, operator norms and projection onto the positive semidefinite cone.
//!
//! Matrices are small (dimension at most a few hundred) and stored densely in
//! row-major order. Every tolerance used here is an explicit parameter with a
//! documented default.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default relative tolerance of the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: symmetry residual {residual:e} exceeds {tolerance:e}")]
    NotHermitian { residual: f64, tolerance: f64 },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("function is undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },
    #[error("matrix data has {actual} entries, expected {expected}")]
    BadLength { expected: usize, actual: usize },
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::BadLength {
                    expected: c,
                    actual: row.len(),
                });
            }
            data.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(r, c, data)
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Matrix product; panics on incompatible shapes.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius inner product `Re tr(self† other)`.
    pub fn real_inner(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `max |m_ij - conj(m_ji)|`, or infinity for non-square input.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut r: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    /// Block-diagonal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    /// `(M + M†)/2`, returned as a matrix that is exactly Hermitian.
    pub fn hermitian_part(&self) -> HermitianMatrix {
        assert!(self.is_square(), "hermitian_part of non-square matrix");
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = C64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let z = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        HermitianMatrix(out)
    }

    /// `(M - M†)/(2i)`, so that `M = hermitian_part + i * skew_hermitian_part`.
    pub fn skew_hermitian_part(&self) -> HermitianMatrix {
        let shifted = Self::from_fn(self.rows, self.cols, |i, j| {
            // (M - M†)/(2i) is the Hermitian part of -iM
            self[(i, j)] * C64::new(0.0, -1.0)
        });
        shifted.hermitian_part()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
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
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Matrices serialize as nested arrays of [re, im] pairs, one inner array per row.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            let row: Vec<[f64; 2]> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    [z.re, z.im]
                })
                .collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(de::Error::custom("ragged matrix rows"));
            }
            data.extend(row.iter().map(|p| C64::new(p[0], p[1])));
        }
        ComplexMatrix::new(r, c, data).map_err(de::Error::custom)
    }
}

/// Self-adjoint square matrix. The wrapped matrix satisfies
/// `max |m_ij - conj(m_ji)| <= 1e-12 * (1 + max |m_ij|)` at construction.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::with_tolerance(m, HERMITIAN_TOL)
    }

    /// Checks the symmetry residual against `rel_tol * (1 + max |entry|)`.
    pub fn with_tolerance(m: ComplexMatrix, rel_tol: f64) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let tolerance = rel_tol * (1.0 + m.max_abs());
        let residual = m.hermitian_residual();
        if residual > tolerance {
            return Err(LinalgError::NotHermitian { residual, tolerance });
        }
        Ok(Self(m))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diag(diag))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_real(s))
    }

    /// `tr(self * other)`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &Self) -> f64 {
        self.0.real_inner(&other.0)
    }

    pub fn diag_real(&self) -> Vec<f64> {
        self.0.diag().iter().map(|z| z.re).collect()
    }

    /// Diagonal in the standard basis, with off-diagonal entries at most `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.0)
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigMethod {
    /// Householder reduction to real tridiagonal form followed by implicit QL.
    #[default]
    Tridiagonal,
    /// Cyclic complex Jacobi rotations.
    Jacobi,
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    pub method: EigMethod,
    /// Relative Hermitian symmetry tolerance applied before solving.
    pub symmetry_tol: f64,
    /// Sweep cap for Jacobi, per-eigenvalue iteration cap for QL.
    pub max_iterations: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            method: EigMethod::default(),
            symmetry_tol: HERMITIAN_TOL,
            max_iterations: 100,
        }
    }
}

impl EigOptions {
    pub fn jacobi() -> Self {
        Self {
            method: EigMethod::Jacobi,
            ..Self::default()
        }
    }
}

/// Eigenpairs with ascending eigenvalues; column `k` of `vectors` belongs to
/// `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// `U diag(g(λ)) U†`.
    pub fn recompose(&self, mut g: impl FnMut(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let weights: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        let u = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        acc += u[(i, k)] * u[(j, k)].conj() * w;
                    }
                }
                out[(i, j)] = acc;
                if i != j {
                    out[(j, i)] = acc.conj();
                }
            }
            out[(i, i)].im = 0.0;
        }
        HermitianMatrix(out)
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.recompose(|l| l)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn eig_hermitian(a: &HermitianMatrix) -> Result<Eigen, LinalgError> {
    eig_hermitian_with(a.as_matrix(), &EigOptions::default())
}

/// Eigendecomposition of a (numerically) Hermitian matrix.
///
/// Eigenvalues are sorted ascending; each eigenvector is rescaled so that its
/// first component of magnitude above `1e-8 * max |component|` is real
/// positive, which makes the output reproducible for simple eigenvalues.
pub fn eig_hermitian_with(a: &ComplexMatrix, opts: &EigOptions) -> Result<Eigen, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let tolerance = opts.symmetry_tol * (1.0 + a.max_abs());
    let residual = a.hermitian_residual();
    if residual > tolerance {
        return Err(LinalgError::NotHermitian { residual, tolerance });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let (values, vectors) = match opts.method {
        EigMethod::Jacobi => jacobi(a, opts.max_iterations)?,
        EigMethod::Tridiagonal => tridiagonal_ql(a, opts.max_iterations)?,
    };
    Ok(sort_and_normalize(values, vectors))
}

fn sort_and_normalize(values: Vec<f64>, vectors: ComplexMatrix) -> Eigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut sorted = ComplexMatrix::zeros(n, n);
    let mut sorted_values = Vec::with_capacity(n);
    for (new_k, &old_k) in order.iter().enumerate() {
        sorted_values.push(values[old_k]);
        let col: Vec<C64> = (0..n).map(|i| vectors[(i, old_k)]).collect();
        let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let phase = col
            .iter()
            .find(|z| z.norm() > 1e-8 * peak)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(ONE);
        for (i, z) in col.into_iter().enumerate() {
            sorted[(i, new_k)] = z * phase;
        }
    }
    Eigen {
        values: sorted_values,
        vectors: sorted,
    }
}

fn jacobi(a: &ComplexMatrix, max_sweeps: usize) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let n = a.rows;
    let mut m = a.hermitian_part().into_matrix();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _sweep in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= f64::EPSILON * scale {
            let values = (0..n).map(|i| m[(i, i)].re).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let e = apq / g;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns: M <- M G with g_p = (c, -s ē), g_q = (s e, c).
                let se = e * s;
                let sec = e.conj() * s;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * sec;
                    m[(k, q)] = mkp * se + mkq * c;
                }
                // Rows: M <- G† M.
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * se;
                    m[(q, k)] = mpk * sec + mqk * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * sec;
                    v[(k, q)] = vkp * se + vkq * c;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence { iterations: max_sweeps })
}

fn tridiagonal_ql(a: &ComplexMatrix, max_iterations: usize) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let n = a.rows;
    let mut m = a.hermitian_part().into_matrix();
    let mut q = ComplexMatrix::identity(n);

    // Householder reduction: A = Q T Q† with T Hermitian tridiagonal.
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<C64> = (0..len).map(|i| m[(k + 1 + i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if xnorm == 0.0 || tail == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // p = A22 v on the trailing block
        let mut p = vec![ZERO; len];
        for i in 0..len {
            let mut acc = ZERO;
            for j in 0..len {
                acc += m[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = acc;
        }
        let kappa: C64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let w: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| (pi - vi * kappa.re) * 2.0).collect();
        for i in 0..len {
            for j in 0..len {
                let delta = v[i] * w[j].conj() + w[i] * v[j].conj();
                m[(k + 1 + i, k + 1 + j)] -= delta;
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha.conj();
        for i in 1..len {
            m[(k + 1 + i, k)] = ZERO;
            m[(k, k + 1 + i)] = ZERO;
        }
        // Q <- Q H
        for r in 0..n {
            let mut acc = ZERO;
            for j in 0..len {
                acc += q[(r, k + 1 + j)] * v[j];
            }
            for j in 0..len {
                q[(r, k + 1 + j)] -= acc * v[j].conj() * 2.0;
            }
        }
    }

    // Rotate phases so that the subdiagonal becomes real and non-negative.
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut phase = ONE;
    for k in 0..n.saturating_sub(1) {
        let sub = m[(k + 1, k)];
        let r = sub.norm();
        e[k] = r;
        let next = if r > 0.0 { phase * (sub / r) } else { phase };
        for row in 0..n {
            q[(row, k + 1)] *= next;
        }
        phase = next;
    }

    // Implicit QL with Wilkinson-type shifts on (d, e); e[i] couples i and i+1.
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > max_iterations {
                return Err(LinalgError::NoConvergence {
                    iterations: max_iterations,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = mm;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..n {
                    let zf = q[(row, i + 1)];
                    let zi = q[(row, i)];
                    q[(row, i + 1)] = zi * s + zf * c;
                    q[(row, i)] = zi * c - zf * s;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok((d, q))
}

/// `U f(Λ) U†` for the eigendecomposition `A = U Λ U†`.
///
/// A non-finite value of `f` at an eigenvalue is reported as a domain error.
pub fn apply_function(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix, LinalgError> {
    let eig = eig_hermitian(a)?;
    let mut mapped = Vec::with_capacity(eig.values.len());
    for &l in &eig.values {
        let y = f(l);
        if !y.is_finite() {
            return Err(LinalgError::Domain { eigenvalue: l });
        }
        mapped.push(y);
    }
    let mut it = mapped.into_iter();
    Ok(eig.recompose(|_| it.next().unwrap_or(0.0)))
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.rows == 0 || m.cols == 0 || m.is_zero() {
        return 0.0;
    }
    let gram = if m.rows <= m.cols {
        m.matmul(&m.adjoint())
    } else {
        m.adjoint().matmul(m)
    };
    let g = gram.hermitian_part();
    let top = eig_hermitian(&g).map(|e| e.max()).expect("Gram matrix is Hermitian");
    top.max(0.0).sqrt()
}

/// Singular values in descending order (`min(rows, cols)` of them).
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return vec![];
    }
    let gram = if m.rows <= m.cols {
        m.matmul(&m.adjoint())
    } else {
        m.adjoint().matmul(m)
    };
    let eig = eig_hermitian(&gram.hermitian_part()).expect("Gram matrix is Hermitian");
    let mut s: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    s.reverse();
    s
}

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues are
/// clamped to zero.
pub fn psd_project(h: &HermitianMatrix) -> HermitianMatrix {
    let eig = eig_hermitian(h).expect("psd_project requires a Hermitian matrix");
    if eig.min() >= 0.0 {
        return h.clone();
    }
    eig.recompose(|l| l.max(0.0))
}

pub fn min_eigenvalue(h: &HermitianMatrix) -> Result<f64, LinalgError> {
    Ok(eig_hermitian(h)?.min())
}

pub fn max_eigenvalue(h: &HermitianMatrix) -> Result<f64, LinalgError> {
    Ok(eig_hermitian(h)?.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        m.hermitian_part()
    }

    fn frob_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).frobenius_norm()
    }

    #[test]
    fn diagonal_input_gives_sorted_values_and_permutation_vectors() {
        for opts in [EigOptions::default(), EigOptions::jacobi()] {
            let a = HermitianMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
            let e = eig_hermitian_with(a.as_matrix(), &opts).unwrap();
            assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
            let expected =
                ComplexMatrix::from_real_rows(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
                    .unwrap();
            assert!(frob_diff(&e.vectors, &expected) < 1e-14);
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eig_hermitian(&HermitianMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            eig_hermitian_with(&m, &EigOptions::default()),
            Err(LinalgError::NotHermitian { .. })
        ));
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn jacobi_sweep_cap_reports_non_convergence() {
        let a = random_hermitian(8, 3);
        let opts = EigOptions {
            max_iterations: 1,
            ..EigOptions::jacobi()
        };
        assert!(matches!(
            eig_hermitian_with(a.as_matrix(), &opts),
            Err(LinalgError::NoConvergence { .. })
        ));
    }

    #[test]
    fn both_methods_reconstruct_random_matrices() {
        for &n in &[1usize, 2, 5, 17, 64] {
            let a = random_hermitian(n, n as u64);
            for opts in [EigOptions::default(), EigOptions::jacobi()] {
                let e = eig_hermitian_with(a.as_matrix(), &opts).unwrap();
                let scale = a.as_matrix().frobenius_norm();
                let err = frob_diff(e.reconstruct().as_matrix(), a.as_matrix());
                assert!(err <= 1e-10 * n as f64 * scale, "n={n} {opts:?} err={err}");
                let utu = e.vectors.adjoint().matmul(&e.vectors);
                assert!(frob_diff(&utu, &ComplexMatrix::identity(n)) < 1e-10);
                assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn methods_agree_on_eigenvalues() {
        let a = random_hermitian(30, 11);
        let q = eig_hermitian_with(a.as_matrix(), &EigOptions::default()).unwrap();
        let j = eig_hermitian_with(a.as_matrix(), &EigOptions::jacobi()).unwrap();
        for (x, y) in q.values.iter().zip(&j.values) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn eigenvector_phase_is_normalized() {
        let a = random_hermitian(6, 5);
        let e = eig_hermitian(&a).unwrap();
        for k in 0..6 {
            let v = e.vector(k);
            let first = v.iter().find(|z| z.norm() > 1e-8).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn square_function_on_diagonal() {
        let a = HermitianMatrix::from_real_diag(&[0.0, 0.5, 1.0]);
        let fa = apply_function(&a, |x| x * x).unwrap();
        assert!(frob_diff(fa.as_matrix(), &ComplexMatrix::from_real_diag(&[0.0, 0.25, 1.0])) < 1e-15);
    }

    #[test]
    fn identity_function_returns_input() {
        let a = random_hermitian(7, 21);
        let fa = apply_function(&a, |x| x).unwrap();
        assert!(frob_diff(fa.as_matrix(), a.as_matrix()) < 1e-12);
    }

    #[test]
    fn abs_shift_matches_entrywise_oracle() {
        let diag = [0.25, 0.0, 0.5];
        let a = HermitianMatrix::from_real_diag(&diag);
        let fa = apply_function(&a, |x| (x - 0.5).abs()).unwrap();
        let oracle: Vec<f64> = diag.iter().map(|x| (x - 0.5f64).abs()).collect();
        assert_eq!(oracle, vec![0.25, 0.5, 0.0]);
        assert!(frob_diff(fa.as_matrix(), &ComplexMatrix::from_real_diag(&oracle)) < 1e-15);
    }

    #[test]
    fn functional_calculus_commutes_and_matches_horner() {
        let a = random_hermitian(9, 8);
        let fa = apply_function(&a, |x| 2.0 * x * x * x - x + 0.5).unwrap();
        let am = a.as_matrix();
        let comm = &fa.as_matrix().matmul(am) - &am.matmul(fa.as_matrix());
        assert!(comm.max_abs() < 1e-10);
        // Horner: ((2A) A - I) A + 0.5 I
        let n = a.dim();
        let id = ComplexMatrix::identity(n);
        let horner = &(&am.scale_real(2.0).matmul(am) - &id).matmul(am) + &id.scale_real(0.5);
        assert!((&horner - fa.as_matrix()).max_abs() < 1e-10);
    }

    #[test]
    fn domain_error_reports_eigenvalue() {
        let a = HermitianMatrix::from_real_diag(&[-1.0, 4.0]);
        match apply_function(&a, f64::sqrt) {
            Err(LinalgError::Domain { eigenvalue }) => assert_eq!(eigenvalue, -1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn operator_norm_basics() {
        assert_eq!(operator_norm(&ComplexMatrix::zeros(3, 3)), 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = ComplexMatrix::new(
            2,
            2,
            vec![C64::new(s, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(s, 0.0)],
        )
        .unwrap();
        assert!((operator_norm(&u) - 1.0).abs() < 1e-12);
        let r = ComplexMatrix::from_real_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, -4.0, 0.0]]).unwrap();
        assert!((operator_norm(&r) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn psd_projection_examples() {
        let p = psd_project(&HermitianMatrix::from_real_diag(&[-1.0, 2.0]));
        assert!(frob_diff(p.as_matrix(), &ComplexMatrix::from_real_diag(&[0.0, 2.0])) < 1e-15);

        let swap =
            HermitianMatrix::new(ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let p = psd_project(&swap);
        let half = ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(frob_diff(p.as_matrix(), &half) < 1e-14);

        let psd =
            HermitianMatrix::new(ComplexMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        assert!(frob_diff(psd_project(&psd).as_matrix(), psd.as_matrix()) < 1e-10);
    }

    #[test]
    fn kron_and_direct_sum_shapes() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::from_real_diag(&[1.0, 2.0, 3.0]);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        assert_eq!(k[(4, 4)], C64::new(2.0, 0.0));
        let d = a.direct_sum(&b);
        assert_eq!(d[(2, 2)], ONE);
        assert_eq!(d[(4, 4)], C64::new(3.0, 0.0));
    }

    #[test]
    fn cartesian_parts_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ComplexMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let re = m.hermitian_part();
        let im = m.skew_hermitian_part();
        let back = re.as_matrix() + &im.as_matrix().scale(C64::new(0.0, 1.0));
        assert!(frob_diff(&back, &m) < 1e-14);
    }

    #[test]
    fn serde_uses_re_im_pairs() {
        let m = ComplexMatrix::new(1, 2, vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,-2.0],[0.5,0.0]]]");
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
