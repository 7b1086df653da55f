//! Unital completely positive maps between matrix algebras, represented by
//! their Choi matrices.
//!
//! Convention: `C = Σ_ij E_ij ⊗ φ(E_ij)`, so the `(i, j)` block of size
//! `n_out` is `φ(E_ij)` and `C[(i n_out + k, j n_out + l)] = φ(E_ij)[k, l]`.
//! Then `φ(X) = Σ_ij X_ij φ(E_ij) = tr_1[(Xᵀ ⊗ 1) C]`, complete positivity is
//! `C ≥ 0` and unitality is `Σ_i φ(E_ii) = 1`, the partial trace over the
//! first (input) factor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eig_hermitian, ComplexMatrix, HermitianMatrix, LinalgError, C64, ONE, ZERO};

/// Default tolerance for the positivity and unitality checks.
pub const UCP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChoiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    n_in: usize,
    n_out: usize,
    matrix: HermitianMatrix,
}

/// Outcome of [`ChoiMatrix::is_ucp`] with the worst violations found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcpDiagnostics {
    pub is_ucp: bool,
    pub min_eigenvalue: f64,
    /// Max-entry distance of the input partial trace from the identity.
    pub unitality_residual: f64,
    pub tolerance: f64,
}

impl std::fmt::Debug for ChoiMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ChoiMatrix(n_in={}, n_out={}) {:?}",
            self.n_in, self.n_out, self.matrix
        )
    }
}

impl ChoiMatrix {
    /// Wraps a Hermitian matrix of dimension `n_in * n_out`. Positivity and
    /// unitality are not enforced here; see [`ChoiMatrix::is_ucp`].
    pub fn new(n_in: usize, n_out: usize, matrix: HermitianMatrix) -> Result<Self, ChoiError> {
        if n_in == 0 || n_out == 0 || matrix.dim() != n_in * n_out {
            return Err(ChoiError::DimensionMismatch(format!(
                "Choi matrix of dimension {} cannot encode a map M_{n_in} -> M_{n_out}",
                matrix.dim()
            )));
        }
        Ok(Self { n_in, n_out, matrix })
    }

    /// Choi matrix of an arbitrary linear map given by its action on matrix
    /// units. The result is Hermitian only if the map is Hermitian-preserving.
    pub fn from_linear_map(
        n_in: usize,
        n_out: usize,
        mut map: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self, ChoiError> {
        let d = n_in * n_out;
        let mut c = ComplexMatrix::zeros(d, d);
        for i in 0..n_in {
            for j in 0..n_in {
                let mut e = ComplexMatrix::zeros(n_in, n_in);
                e[(i, j)] = ONE;
                let img = map(&e);
                if img.rows() != n_out || img.cols() != n_out {
                    return Err(ChoiError::DimensionMismatch(format!(
                        "map output is {}x{}, expected {n_out}x{n_out}",
                        img.rows(),
                        img.cols()
                    )));
                }
                for k in 0..n_out {
                    for l in 0..n_out {
                        c[(i * n_out + k, j * n_out + l)] = img[(k, l)];
                    }
                }
            }
        }
        let matrix = HermitianMatrix::with_tolerance(c, 1e-10)?;
        Self::new(n_in, n_out, matrix.as_matrix().hermitian_part())
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// `φ(E_ij)`.
    pub fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let m = self.matrix.as_matrix();
        let n = self.n_out;
        ComplexMatrix::from_fn(n, n, |k, l| m[(i * n + k, j * n + l)])
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix, ChoiError> {
        if x.rows() != self.n_in || x.cols() != self.n_in {
            return Err(ChoiError::DimensionMismatch(format!(
                "input is {}x{}, map expects {}x{}",
                x.rows(),
                x.cols(),
                self.n_in,
                self.n_in
            )));
        }
        let n = self.n_out;
        let m = self.matrix.as_matrix();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..self.n_in {
            for j in 0..self.n_in {
                let xij = x[(i, j)];
                if xij == ZERO {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        out[(k, l)] += xij * m[(i * n + k, j * n + l)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies the map to a Hermitian input; the output is symmetrized.
    pub fn apply_hermitian(&self, x: &HermitianMatrix) -> Result<HermitianMatrix, ChoiError> {
        Ok(self.apply(x.as_matrix())?.hermitian_part())
    }

    /// `tr_1 C = Σ_i φ(E_ii) = φ(1)`.
    pub fn partial_trace_input(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n_out, self.n_out);
        for i in 0..self.n_in {
            out = &out + &self.block(i, i);
        }
        out
    }

    pub fn is_ucp(&self) -> UcpDiagnostics {
        self.is_ucp_with(UCP_TOL)
    }

    pub fn is_ucp_with(&self, tol: f64) -> UcpDiagnostics {
        let min_eigenvalue = eig_hermitian(&self.matrix)
            .map(|e| e.min())
            .unwrap_or(f64::NEG_INFINITY);
        let unitality_residual = (&self.partial_trace_input() - &ComplexMatrix::identity(self.n_out)).max_abs();
        UcpDiagnostics {
            is_ucp: min_eigenvalue >= -tol && unitality_residual <= tol,
            min_eigenvalue,
            unitality_residual,
            tolerance: tol,
        }
    }

    /// Choi matrix of `self ∘ inner`.
    pub fn compose(&self, inner: &ChoiMatrix) -> Result<ChoiMatrix, ChoiError> {
        if inner.n_out != self.n_in {
            return Err(ChoiError::DimensionMismatch(format!(
                "cannot compose: inner map outputs M_{}, outer map expects M_{}",
                inner.n_out, self.n_in
            )));
        }
        let mut failure = None;
        let c = ChoiMatrix::from_linear_map(inner.n_in, self.n_out, |e| {
            match inner.apply(e).and_then(|y| self.apply(&y)) {
                Ok(z) => z,
                Err(err) => {
                    failure = Some(err);
                    ComplexMatrix::zeros(self.n_out, self.n_out)
                }
            }
        })?;
        match failure {
            Some(err) => Err(err),
            None => Ok(c),
        }
    }
}

/// The identity channel on `M_n`: `C = Σ_ij E_ij ⊗ E_ij`, the rank-one
/// projection onto the unnormalized maximally correlated vector.
pub fn choi_of_identity(n: usize) -> ChoiMatrix {
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            c[(i * n + i, j * n + j)] = ONE;
        }
    }
    ChoiMatrix {
        n_in: n,
        n_out: n,
        matrix: c.hermitian_part(),
    }
}

/// The conditional expectation onto the diagonal subalgebra of `M_n`.
pub fn choi_of_pinching(n: usize) -> ChoiMatrix {
    choi_of_block_pinching(&vec![1; n]).expect("unit blocks always partition n")
}

/// Pinching onto contiguous diagonal blocks of the given sizes.
pub fn choi_of_block_pinching(block_sizes: &[usize]) -> Result<ChoiMatrix, ChoiError> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(ChoiError::DimensionMismatch(
            "block sizes must be positive and non-empty".to_string(),
        ));
    }
    let n: usize = block_sizes.iter().sum();
    let mut label = Vec::with_capacity(n);
    for (b, &s) in block_sizes.iter().enumerate() {
        label.extend(std::iter::repeat_n(b, s));
    }
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            if label[i] == label[j] {
                c[(i * n + i, j * n + j)] = ONE;
            }
        }
    }
    Ok(ChoiMatrix {
        n_in: n,
        n_out: n,
        matrix: c.hermitian_part(),
    })
}

/// `X ↦ U X U†` for a square matrix `U` (completely positive; unital when `U`
/// is unitary).
pub fn choi_of_conjugation(u: &ComplexMatrix) -> Result<ChoiMatrix, ChoiError> {
    if !u.is_square() {
        return Err(ChoiError::DimensionMismatch("conjugating matrix must be square".into()));
    }
    let n = u.rows();
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    // φ(E_ij)[k, l] = U[k, i] conj(U[l, j])
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    c[(i * n + k, j * n + l)] = u[(k, i)] * u[(l, j)].conj();
                }
            }
        }
    }
    Ok(ChoiMatrix {
        n_in: n,
        n_out: n,
        matrix: c.hermitian_part(),
    })
}

/// Diagonal map `X ↦ diag(W · diag(X))`: the pinching onto the diagonal
/// followed by the stochastic matrix `W` (`n_out` rows, `n_in` columns).
/// Each row of `W` must be non-negative and sum to 1 within `1e-12`.
pub fn choi_of_diagonal_map(weights: &[Vec<f64>]) -> Result<ChoiMatrix, ChoiError> {
    let n_out = weights.len();
    let n_in = weights.first().map_or(0, Vec::len);
    if n_out == 0 || n_in == 0 {
        return Err(ChoiError::InvalidWeights("empty weight matrix".into()));
    }
    for (k, row) in weights.iter().enumerate() {
        if row.len() != n_in {
            return Err(ChoiError::InvalidWeights(format!(
                "row {k} has {} entries, expected {n_in}",
                row.len()
            )));
        }
        if let Some(w) = row.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ChoiError::InvalidWeights(format!("row {k} has weight {w}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(ChoiError::InvalidWeights(format!("row {k} sums to {s}")));
        }
    }
    let d = n_in * n_out;
    let mut c = ComplexMatrix::zeros(d, d);
    for j in 0..n_in {
        for (k, row) in weights.iter().enumerate() {
            c[(j * n_out + k, j * n_out + k)] = C64::new(row[j], 0.0);
        }
    }
    Ok(ChoiMatrix {
        n_in,
        n_out,
        matrix: c.hermitian_part(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, HermitianMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        // Gram-Schmidt on the columns of a random complex matrix.
        let m = random_complex(n, rng);
        let mut cols: Vec<Vec<C64>> = Vec::new();
        for j in 0..n {
            let mut v: Vec<C64> = (0..n).map(|i| m[(i, j)]).collect();
            for q in &cols {
                let dot: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
        ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    fn channels(rng: &mut ChaCha8Rng) -> Vec<ChoiMatrix> {
        let u = random_unitary(3, rng);
        let conj = choi_of_conjugation(&u).unwrap();
        vec![
            choi_of_identity(3),
            choi_of_pinching(3),
            choi_of_block_pinching(&[1, 2]).unwrap(),
            choi_of_diagonal_map(&[vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
            conj.clone(),
            choi_of_pinching(3).compose(&conj).unwrap(),
        ]
    }

    #[test]
    fn identity_channel_fixes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_complex(4, &mut rng);
        let id = choi_of_identity(4);
        assert!((&id.apply(&x).unwrap() - &x).max_abs() < 1e-15);
        let pauli = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(choi_of_identity(2).apply(&pauli).unwrap(), pauli);
        assert!(id.is_ucp().is_ucp);
    }

    #[test]
    fn pinching_kills_off_diagonals() {
        let ones = ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let out = choi_of_pinching(2).apply(&ones).unwrap();
        assert_eq!(out, ComplexMatrix::identity(2));
    }

    #[test]
    fn diagonal_map_of_the_abs_witness() {
        let w = vec![vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let phi = choi_of_diagonal_map(&w).unwrap();
        let x = ComplexMatrix::from_real_diag(&[1.0 / 16.0, 0.0, 0.25]);
        let out = phi.apply(&x).unwrap();
        assert!((&out - &ComplexMatrix::from_real_diag(&[0.125, 0.0, 0.25])).max_abs() < 1e-15);
        // direct formula: diag(W · diag(X)), off-diagonal entries dropped
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = random_complex(3, &mut rng);
        let out = phi.apply(&y).unwrap();
        for k in 0..3 {
            let direct: C64 = (0..3).map(|j| y[(j, j)] * w[k][j]).sum();
            assert!((out[(k, k)] - direct).norm() < 1e-15);
            for l in 0..3 {
                if l != k {
                    assert_eq!(out[(k, l)], ZERO);
                }
            }
        }
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(choi_of_diagonal_map(&[vec![0.5, 0.6]]).is_err());
        assert!(choi_of_diagonal_map(&[vec![1.5, -0.5]]).is_err());
        assert!(choi_of_diagonal_map(&[vec![1.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn pinching_is_idempotent() {
        let p = choi_of_pinching(3);
        assert_eq!(p.compose(&p).unwrap(), p);
    }

    #[test]
    fn negative_eigenvalue_fails_ucp_check() {
        let c = HermitianMatrix::from_real_diag(&[1.0, -0.1, 0.0, 1.0]);
        let phi = ChoiMatrix::new(2, 2, c).unwrap();
        let d = phi.is_ucp();
        assert!(!d.is_ucp);
        assert!((d.min_eigenvalue + 0.1).abs() < 1e-12);
    }

    #[test]
    fn non_unital_map_fails_ucp_check() {
        let c = HermitianMatrix::from_real_diag(&[2.0, 0.0, 0.0, 1.0]);
        let d = ChoiMatrix::new(2, 2, c).unwrap().is_ucp();
        assert!(!d.is_ucp);
        assert!((d.unitality_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugation_matches_direct_product() {
        // Locks the transpose (not adjoint) in the apply formula.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(3, &mut rng);
        let phi = choi_of_conjugation(&u).unwrap();
        assert!(phi.is_ucp().is_ucp);
        let x = random_complex(3, &mut rng);
        let direct = u.matmul(&x).matmul(&u.adjoint());
        assert!((&phi.apply(&x).unwrap() - &direct).max_abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatches() {
        let phi = choi_of_identity(2);
        assert!(phi.apply(&ComplexMatrix::identity(3)).is_err());
        assert!(phi.compose(&choi_of_identity(3)).is_err());
        assert!(ChoiMatrix::new(2, 3, HermitianMatrix::identity(5)).is_err());
    }

    #[test]
    fn constructed_channels_are_ucp_cp_and_schwarz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for phi in channels(&mut rng) {
            assert!(phi.is_ucp().is_ucp, "{phi:?}");
            let one = phi.apply(&ComplexMatrix::identity(3)).unwrap();
            assert!((&one - &ComplexMatrix::identity(3)).max_abs() < 1e-10);
            for _ in 0..20 {
                let g = random_complex(3, &mut rng);
                let psd = g.matmul(&g.adjoint()).hermitian_part();
                let out = phi.apply_hermitian(&psd).unwrap();
                assert!(min_eigenvalue(&out).unwrap() >= -1e-9);

                let x = random_complex(3, &mut rng).hermitian_part();
                let x2 = x.as_matrix().matmul(x.as_matrix());
                let px = phi.apply(x.as_matrix()).unwrap();
                let gap = &phi.apply(&x2).unwrap() - &px.matmul(&px);
                assert!(min_eigenvalue(&gap.hermitian_part()).unwrap() >= -1e-9);
            }
        }
    }

    #[test]
    fn compose_agrees_with_sequential_apply_on_matrix_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cs = channels(&mut rng);
        for a in &cs {
            for b in &cs {
                let ab = a.compose(b).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        let mut e = ComplexMatrix::zeros(3, 3);
                        e[(i, j)] = ONE;
                        let lhs = ab.apply(&e).unwrap();
                        let rhs = a.apply(&b.apply(&e).unwrap()).unwrap();
                        assert!((&lhs - &rhs).max_abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn serializes_with_dimension_header() {
        let s = serde_json::to_value(choi_of_identity(1)).unwrap();
        assert_eq!(s["n_in"], 1);
        assert_eq!(s["n_out"], 1);
        assert_eq!(s["matrix"], serde_json::json!([[[1.0, 0.0]]]));
    }
}
