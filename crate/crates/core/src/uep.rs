//! Searching for unital completely positive maps on `M_n` that fix an
//! operator system pointwise but move something in the algebra it generates.
//!
//! The feasible set `F = {C ≥ 0 : φ_C(g) = g for all g in S}` always contains
//! the identity channel. Each restart starts from a perturbation of the
//! identity channel and runs Dykstra's alternating projections between the
//! PSD cone and the affine set of Choi matrices fixing `S`, which converges to
//! the point of `F` nearest the start. Dykstra slows to a sublinear crawl on
//! faces of the PSD cone with no interior feasible point (diagonal systems
//! are like this), so each endpoint is finished by Gauss-Newton on a
//! factorization `C = K K†`. Further rounds push the feasible map along the
//! gradient of the probe deviation and project again.
//!
//! If `F` is a single point every restart returns to the identity channel.
//!
//! A `NoViolationFound` report is heuristic evidence only: the search cannot
//! certify the unique extension property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::choi::{choi_of_diagonal_map, choi_of_identity, ChoiError, ChoiMatrix, UcpDiagnostics};
use crate::linalg::{eig_hermitian, operator_norm, psd_project, ComplexMatrix, HermitianMatrix, LinalgError, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UepError {
    #[error("generator {index} is {rows}x{cols}, expected {n}x{n}")]
    BadGenerator {
        index: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("the unit is not in the span of the generators (residual {residual:e})")]
    NotUnital { residual: f64 },
    #[error("probe {index} is not {n}x{n}")]
    BadProbe { index: usize, n: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("need at least 3 distinct eigenvalues on the diagonal, found {found}")]
    TooFewEigenvalues { found: usize },
    #[error("expected a diagonal matrix")]
    NotDiagonal,
    #[error("summand {index} was not reported as NoViolationFound")]
    SummandViolated { index: usize },
    #[error(transparent)]
    Choi(#[from] ChoiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Span tolerance for membership and basis extraction.
pub const SPAN_TOL: f64 = 1e-10;

/// A Frobenius-orthonormal basis of the real span of the Hermitian and
/// skew-Hermitian parts of `generators`, i.e. of the Hermitian part of their
/// complex span together with adjoints.
pub fn hermitian_basis_of(generators: &[ComplexMatrix]) -> Vec<HermitianMatrix> {
    let mut basis: Vec<HermitianMatrix> = Vec::new();
    for g in generators {
        for h in [g.hermitian_part(), g.skew_hermitian_part()] {
            let scale = h.as_matrix().frobenius_norm();
            if scale == 0.0 {
                continue;
            }
            // Two passes of Gram-Schmidt for stability.
            let mut r = h;
            for _ in 0..2 {
                for b in &basis {
                    let c = r.trace_product(b);
                    r = r.sub(&b.scale(c));
                }
            }
            let norm = r.as_matrix().frobenius_norm();
            if norm > SPAN_TOL * scale.max(1.0) {
                basis.push(r.scale(1.0 / norm));
            }
        }
    }
    basis
}

/// A unital self-adjoint subspace of `M_n`, stored through a real
/// Frobenius-orthonormal basis of its Hermitian part.
#[derive(Debug, Clone)]
pub struct OperatorSystemM {
    n: usize,
    generators: Vec<ComplexMatrix>,
    hermitian_basis: Vec<HermitianMatrix>,
}

impl OperatorSystemM {
    /// `span(G ∪ G*)`. The unit must lie in the span.
    pub fn new(n: usize, generators: Vec<ComplexMatrix>) -> Result<Self, UepError> {
        for (index, g) in generators.iter().enumerate() {
            if g.rows() != n || g.cols() != n {
                return Err(UepError::BadGenerator {
                    index,
                    rows: g.rows(),
                    cols: g.cols(),
                    n,
                });
            }
        }
        let basis = hermitian_basis_of(&generators);
        let s = Self {
            n,
            generators,
            hermitian_basis: basis,
        };
        let residual = s.span_residual(&ComplexMatrix::identity(n));
        if residual > SPAN_TOL {
            return Err(UepError::NotUnital { residual });
        }
        Ok(s)
    }

    /// `span{1, A, ..., A^k}`.
    pub fn from_powers(a: &ComplexMatrix, k: usize) -> Result<Self, UepError> {
        let n = a.rows();
        let mut gens = vec![ComplexMatrix::identity(n)];
        for _ in 0..k {
            let next = gens.last().expect("non-empty").matmul(a);
            gens.push(next);
        }
        Self::new(n, gens)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[ComplexMatrix] {
        &self.generators
    }

    pub fn hermitian_basis(&self) -> &[HermitianMatrix] {
        &self.hermitian_basis
    }

    pub fn dimension(&self) -> usize {
        self.hermitian_basis.len()
    }

    /// Frobenius distance from `m` to the complex span of the system.
    pub fn span_residual(&self, m: &ComplexMatrix) -> f64 {
        let re = m.hermitian_part();
        let im = m.skew_hermitian_part();
        let mut r = 0.0;
        for part in [re, im] {
            let mut rest = part;
            for b in &self.hermitian_basis {
                let c = rest.trace_product(b);
                rest = rest.sub(&b.scale(c));
            }
            r += rest.as_matrix().frobenius_norm().powi(2);
        }
        r.sqrt()
    }

    pub fn contains(&self, m: &ComplexMatrix) -> bool {
        self.span_residual(m) <= SPAN_TOL * m.frobenius_norm().max(1.0)
    }

    /// `{g ⊕ 0} ∪ {0 ⊕ h}`: the system of block-diagonal pairs.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, UepError> {
        let z1 = ComplexMatrix::zeros(self.n, self.n);
        let z2 = ComplexMatrix::zeros(other.n, other.n);
        let mut gens: Vec<ComplexMatrix> = self.generators.iter().map(|g| g.direct_sum(&z2)).collect();
        gens.extend(other.generators.iter().map(|h| z1.direct_sum(h)));
        Self::new(self.n + other.n, gens)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UepParams {
    pub restarts: usize,
    /// Perturbation sizes, cycled across restarts.
    pub epsilons: Vec<f64>,
    pub max_iterations: usize,
    /// Dykstra stops once successive iterates differ by less than this.
    pub change_tol: f64,
    pub violation_tol: f64,
    pub fix_tol: f64,
    /// Gauss-Newton iterations allowed when polishing a Dykstra endpoint.
    pub polish_iterations: usize,
    /// Target max-entry constraint residual of the polished map.
    pub polish_tol: f64,
    /// Extra feasibility rounds per restart, each re-projecting the previous
    /// feasible map pushed again along the restart's direction.
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for UepParams {
    fn default() -> Self {
        Self {
            restarts: 16,
            epsilons: vec![0.05, 0.2, 0.8],
            max_iterations: 500,
            change_tol: 1e-10,
            violation_tol: 1e-4,
            fix_tol: 1e-8,
            polish_iterations: 60,
            polish_tol: 1e-13,
            ascent_steps: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UepStatus {
    Violated,
    NoViolationFound,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartLog {
    pub epsilon: f64,
    pub iterations: usize,
    /// Whether the last round stopped on `change_tol` rather than the cap.
    pub converged: bool,
    pub final_change: f64,
    /// Whether the Gauss-Newton polish reached `polish_tol`.
    pub polished: bool,
    pub polish_iterations: usize,
    /// Max over the generators of `‖φ(g) - g‖` at the returned iterate.
    pub fix_residual: f64,
    pub deviation: f64,
    /// Number of projection rounds run (the first plus any ascent rounds).
    pub stages: usize,
    /// Per round, the distance of the Dykstra iterate to the affine set,
    /// sampled every `AFFINE_LOG_STRIDE` iterations.
    pub affine_distance: Vec<Vec<f64>>,
}

pub const AFFINE_LOG_STRIDE: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct UepReport {
    pub status: UepStatus,
    pub witness: Option<ChoiMatrix>,
    pub witness_checks: Option<WitnessChecks>,
    /// Max over restarts and probes of `‖φ(T) - T‖`.
    pub deviation: f64,
    pub probes: Vec<ComplexMatrix>,
    pub restarts: usize,
    pub iterations: usize,
    pub final_residual: f64,
    pub all_converged: bool,
    pub seed: u64,
    pub restart_log: Vec<RestartLog>,
    pub note: &'static str,
}

/// Independent re-verification of a witness through the Choi matrix.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessChecks {
    pub ucp: UcpDiagnostics,
    pub max_generator_residual: f64,
    pub deviation: f64,
}

const EVIDENCE_NOTE: &str = "NoViolationFound is heuristic evidence from a finite search, not a certificate";

/// Projection onto `{C : φ_C(g_a) = g_a}` for an orthonormal Hermitian basis
/// `g_a`. The constraint operator `L(C)_a = φ_C(g_a)` has adjoint
/// `L*(Y) = Σ_a conj(g_a) ⊗ Y_a` and `L L*` acts as the Gram matrix of the
/// basis, which is the identity up to rounding; its pseudo-inverse is used
/// anyway.
struct AffineProjector {
    n: usize,
    basis: Vec<ComplexMatrix>,
    gram_pinv: Vec<Vec<f64>>,
}

impl AffineProjector {
    fn new(s: &OperatorSystemM) -> Result<Self, UepError> {
        let basis: Vec<ComplexMatrix> = s.hermitian_basis.iter().map(|b| b.as_matrix().clone()).collect();
        let k = basis.len();
        let gram = ComplexMatrix::from_fn(k, k, |a, b| C64::new(basis[a].real_inner(&basis[b]), 0.0));
        let eig = eig_hermitian(&gram.hermitian_part())?;
        let cutoff = 1e-12 * eig.max().max(1.0);
        let pinv = eig.recompose(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        let gram_pinv = (0..k)
            .map(|a| (0..k).map(|b| pinv.as_matrix()[(a, b)].re).collect())
            .collect();
        Ok(Self {
            n: s.n,
            basis,
            gram_pinv,
        })
    }

    fn apply_map(&self, c: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let xij = x[(i, j)];
                if xij.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        out[(k, l)] += xij * c[(i * n + k, j * n + l)];
                    }
                }
            }
        }
        out
    }

    fn residuals(&self, c: &ComplexMatrix) -> Vec<ComplexMatrix> {
        self.basis.iter().map(|g| &self.apply_map(c, g) - g).collect()
    }

    fn distance(&self, c: &ComplexMatrix) -> f64 {
        // For an orthonormal basis the distance is the norm of the residuals.
        let r = self.residuals(c);
        let mut d2 = 0.0;
        for (a, ra) in r.iter().enumerate() {
            for (b, rb) in r.iter().enumerate() {
                d2 += self.gram_pinv[a][b] * ra.real_inner(rb);
            }
        }
        d2.max(0.0).sqrt()
    }

    fn project(&self, c: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let r = self.residuals(c);
        let k = self.basis.len();
        let mut out = c.clone();
        for a in 0..k {
            let mut y = ComplexMatrix::zeros(n, n);
            for (b, rb) in r.iter().enumerate() {
                let w = self.gram_pinv[a][b];
                if w != 0.0 {
                    y = &y + &rb.scale_real(w);
                }
            }
            let g = &self.basis[a];
            for i in 0..n {
                for j in 0..n {
                    let gij = g[(i, j)].conj();
                    if gij.norm_sqr() == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        for q in 0..n {
                            out[(i * n + p, j * n + q)] -= gij * y[(p, q)];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Index of entry `(k, l)`, `k <= l`, in the real vectorization of a
/// Hermitian `n x n` matrix: row by row, the real diagonal entry followed by
/// the real and imaginary parts of the entries right of it.
fn herm_offsets(n: usize) -> Vec<usize> {
    let mut base = Vec::with_capacity(n);
    let mut acc = 0;
    for k in 0..n {
        base.push(acc);
        acc += 1 + 2 * (n - k - 1);
    }
    base
}

fn push_hermitian(m: &ComplexMatrix, out: &mut Vec<f64>) {
    let n = m.rows();
    for k in 0..n {
        out.push(m[(k, k)].re);
        for l in (k + 1)..n {
            out.push(m[(k, l)].re);
            out.push(m[(k, l)].im);
        }
    }
}

/// Dense Cholesky solve of `(A + mu I) y = b` for symmetric positive
/// semidefinite `A` stored row-major. Returns `None` on a non-positive pivot.
fn cholesky_solve(a: &[f64], m: usize, mu: f64, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = a[i * m + j] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                sum -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * m + i] = sum.sqrt();
            } else {
                l[i * m + j] = sum / l[j * m + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            y[i] -= l[i * m + k] * y[k];
        }
        y[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for k in (i + 1)..m {
            y[i] -= l[k * m + i] * y[k];
        }
        y[i] /= l[i * m + i];
    }
    Some(y)
}

struct PolishOutcome {
    choi: ComplexMatrix,
    converged: bool,
    iterations: usize,
}

impl AffineProjector {
    fn residual_vector(&self, c: &ComplexMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.basis.len() * self.n * self.n);
        for r in self.residuals(c) {
            push_hermitian(&r, &mut out);
        }
        out
    }

    /// Damped Gauss-Newton on the factorization `C = K K†`, starting from the
    /// PSD square root of `x`. The iterate is PSD by construction; each step
    /// is the minimum-norm linearized correction of the constraint residual,
    /// halved until the residual decreases.
    fn polish(&self, x: &ComplexMatrix, max_iterations: usize, tol: f64) -> Result<PolishOutcome, UepError> {
        let n = self.n;
        let d = n * n;
        let eig = eig_hermitian(&x.hermitian_part())?;
        let top = eig.max().max(0.0);
        let keep: Vec<usize> = (0..d).filter(|&k| eig.values[k] > 1e-12 * top).collect();
        let r = keep.len().max(1);
        let mut kmat = ComplexMatrix::zeros(d, r);
        for (c, &k) in keep.iter().enumerate() {
            let s = eig.values[k].sqrt();
            for p in 0..d {
                kmat[(p, c)] = eig.vectors[(p, k)] * s;
            }
        }
        let offsets = herm_offsets(n);
        let nb = self.basis.len();
        let m = nb * d;
        let gram = |k: &ComplexMatrix| k.matmul(&k.adjoint());
        let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut c = gram(&kmat);
        let mut res = self.residual_vector(&c);
        let mut iterations = 0;
        let mut mu_scale = 1e-14;
        while iterations < max_iterations {
            if max_abs(&res) <= tol {
                return Ok(PolishOutcome {
                    choi: c,
                    converged: true,
                    iterations,
                });
            }
            iterations += 1;
            // a[a][i0][c][l] = Σ_j g_a[i0, j] conj(K[(j, l), c])
            let mut avec = vec![C64::new(0.0, 0.0); nb * n * r * n];
            for (ai, g) in self.basis.iter().enumerate() {
                for i0 in 0..n {
                    for col in 0..r {
                        for l in 0..n {
                            let mut acc = C64::new(0.0, 0.0);
                            for j in 0..n {
                                acc += g[(i0, j)] * kmat[(j * n + l, col)].conj();
                            }
                            avec[((ai * n + i0) * r + col) * n + l] = acc;
                        }
                    }
                }
            }
            // Sparse Jacobian columns, one per real parameter of K.
            let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(2 * d * r);
            for xi in 0..d {
                let (i0, k0) = (xi / n, xi % n);
                for col in 0..r {
                    for s in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                        let mut entries = Vec::with_capacity(nb * (2 * n - 1));
                        for ai in 0..nb {
                            let base = ai * d;
                            let w = |l: usize| s * avec[((ai * n + i0) * r + col) * n + l];
                            for k in 0..k0 {
                                let z = w(k);
                                let o = base + offsets[k] + 1 + 2 * (k0 - k - 1);
                                entries.push((o, z.re));
                                entries.push((o + 1, -z.im));
                            }
                            entries.push((base + offsets[k0], 2.0 * w(k0).re));
                            for l in (k0 + 1)..n {
                                let z = w(l);
                                let o = base + offsets[k0] + 1 + 2 * (l - k0 - 1);
                                entries.push((o, z.re));
                                entries.push((o + 1, z.im));
                            }
                        }
                        cols.push(entries);
                    }
                }
            }
            let mut jjt = vec![0.0; m * m];
            for col in &cols {
                for &(i, vi) in col {
                    if vi == 0.0 {
                        continue;
                    }
                    let row = &mut jjt[i * m..(i + 1) * m];
                    for &(j, vj) in col {
                        row[j] += vi * vj;
                    }
                }
            }
            let scale = (0..m)
                .map(|i| jjt[i * m + i])
                .fold(0.0_f64, f64::max)
                .max(f64::MIN_POSITIVE);
            let current = max_abs(&res);
            let mut improved = false;
            while mu_scale < 1.0 && !improved {
                let Some(y) = cholesky_solve(&jjt, m, mu_scale * scale, &res) else {
                    mu_scale *= 100.0;
                    continue;
                };
                let delta: Vec<f64> = cols
                    .iter()
                    .map(|col| -col.iter().map(|&(i, v)| v * y[i]).sum::<f64>())
                    .collect();
                let mut step = 1.0;
                for _ in 0..12 {
                    let mut trial = kmat.clone();
                    for xi in 0..d {
                        for col in 0..r {
                            let p = (xi * r + col) * 2;
                            trial[(xi, col)] += C64::new(delta[p], delta[p + 1]) * step;
                        }
                    }
                    let tc = gram(&trial);
                    let tr = self.residual_vector(&tc);
                    if max_abs(&tr) < current {
                        kmat = trial;
                        c = tc;
                        res = tr;
                        improved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    mu_scale *= 100.0;
                }
            }
            if !improved {
                break;
            }
            mu_scale = (mu_scale / 100.0).max(1e-14);
        }
        let converged = max_abs(&res) <= tol;
        Ok(PolishOutcome {
            choi: c,
            converged,
            iterations,
        })
    }
}

fn probe_deviation(phi: &ChoiMatrix, probes: &[ComplexMatrix]) -> Result<f64, UepError> {
    let mut d: f64 = 0.0;
    for t in probes {
        d = d.max(operator_norm(&(&phi.apply(t)? - t)));
    }
    Ok(d)
}

fn generator_residual(phi: &ChoiMatrix, s: &OperatorSystemM) -> Result<f64, UepError> {
    let mut r: f64 = 0.0;
    for g in &s.generators {
        r = r.max(operator_norm(&(&phi.apply(g)? - g)));
    }
    Ok(r)
}

/// Re-verifies a candidate witness from scratch.
pub fn verify_witness(
    phi: &ChoiMatrix,
    s: &OperatorSystemM,
    probes: &[ComplexMatrix],
) -> Result<WitnessChecks, UepError> {
    Ok(WitnessChecks {
        ucp: phi.is_ucp(),
        max_generator_residual: generator_residual(phi, s)?,
        deviation: probe_deviation(phi, probes)?,
    })
}

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    m.hermitian_part().into_matrix()
}

/// Start direction for one restart: `conj(T) ⊗ W` for a seeded probe `T` and
/// random Hermitian `W` (the gradient of `C ↦ Re tr(W φ_C(T))`), plus an
/// isotropic random Hermitian component, made trace-orthogonal to the
/// identity channel and normalized in Frobenius norm.
fn start_direction(n: usize, probes: &[ComplexMatrix], j: &ComplexMatrix, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let d = n * n;
    let mut r = random_hermitian(d, rng).scale_real(0.25 / (d as f64).sqrt());
    if !probes.is_empty() {
        let t = &probes[rng.random_range(0..probes.len())];
        let w = random_hermitian(n, rng);
        let w = w.scale_real(1.0 / w.frobenius_norm().max(f64::MIN_POSITIVE));
        let tn = t.frobenius_norm().max(f64::MIN_POSITIVE);
        let tc = ComplexMatrix::from_fn(n, n, |a, b| t[(a, b)].conj() / tn);
        r = &r + &tc.kron(&w).hermitian_part().into_matrix();
    }
    let c = r.real_inner(j) / j.real_inner(j);
    r = &r - &j.scale_real(c);
    let norm = r.frobenius_norm();
    if norm > 0.0 {
        r.scale_real(1.0 / norm)
    } else {
        r
    }
}

/// Ascent direction for the deviation at `phi`: with `Δ = φ(T) - T` for the
/// most-moved probe and top singular pair `Δv = σu`, the Hermitian part of
/// `conj(T) ⊗ u v†` is the gradient of `C ↦ Re u†φ_C(T)v`. `None` when no
/// probe moves.
fn ascent_direction(
    phi: &ChoiMatrix,
    probes: &[ComplexMatrix],
    j: &ComplexMatrix,
) -> Result<Option<ComplexMatrix>, UepError> {
    let mut top: Option<(f64, &ComplexMatrix, ComplexMatrix)> = None;
    for t in probes {
        let delta = &phi.apply(t)? - t;
        let norm = operator_norm(&delta);
        if top.as_ref().is_none_or(|(d, _, _)| norm > *d) {
            top = Some((norm, t, delta));
        }
    }
    let Some((sigma, t, delta)) = top else {
        return Ok(None);
    };
    if sigma < 1e-12 {
        return Ok(None);
    }
    let n = t.rows();
    let eig = eig_hermitian(&delta.adjoint().matmul(&delta).hermitian_part())?;
    let v = eig.vector(n - 1);
    let u: Vec<C64> = (0..n)
        .map(|a| (0..n).map(|b| delta[(a, b)] * v[b]).sum::<C64>() / sigma)
        .collect();
    let w_adj = ComplexMatrix::from_fn(n, n, |a, b| u[a] * v[b].conj());
    let tc = ComplexMatrix::from_fn(n, n, |a, b| t[(a, b)].conj());
    let mut g = tc.kron(&w_adj).hermitian_part().into_matrix();
    let c = g.real_inner(j) / j.real_inner(j);
    g = &g - &j.scale_real(c);
    let norm = g.frobenius_norm();
    Ok((norm > 0.0).then(|| g.scale_real(1.0 / norm)))
}

struct RestartOutcome {
    phi: ChoiMatrix,
    log: RestartLog,
}

fn run_restart(
    s: &OperatorSystemM,
    proj: &AffineProjector,
    probes: &[ComplexMatrix],
    params: &UepParams,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RestartOutcome, UepError> {
    let n = s.n;
    let j = choi_of_identity(n).matrix().as_matrix().clone();
    let dir = start_direction(n, probes, &j, rng);
    // Perturbations are measured against ‖J‖_F = n.
    let step = epsilon * n as f64;
    let mut push = dir.scale_real(step);

    let mut iterations = 0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut affine_distance = Vec::new();
    let mut polished = true;
    let mut polish_iterations = 0;
    let mut anchor = j.clone();
    let mut best: Option<(ChoiMatrix, f64, f64)> = None;
    let mut stop = false;
    for _stage in 0..=params.ascent_steps {
        let mut x = &anchor + &push;
        let mut q = ComplexMatrix::zeros(n * n, n * n);
        let mut stage_iterations = 0;
        let mut distances = Vec::new();
        converged = false;
        while stage_iterations < params.max_iterations {
            let y = proj.project(&x);
            let yq = &y + &q;
            let z = psd_project(&yq.hermitian_part()).into_matrix();
            q = &yq - &z;
            change = (&z - &x).frobenius_norm();
            x = z;
            if stage_iterations % AFFINE_LOG_STRIDE == 0 {
                distances.push(proj.distance(&x));
            }
            stage_iterations += 1;
            if change < params.change_tol {
                converged = true;
                break;
            }
        }
        iterations += stage_iterations;
        affine_distance.push(distances);
        let polish = proj.polish(&x, params.polish_iterations, params.polish_tol)?;
        polish_iterations += polish.iterations;
        polished &= polish.converged;
        anchor = if polish.converged { polish.choi } else { x };
        let phi = ChoiMatrix::new(n, n, anchor.hermitian_part())?;
        let fix = generator_residual(&phi, s)?;
        let dev = probe_deviation(&phi, probes)?;
        // A stage that moves no probe would only repeat the same push.
        match ascent_direction(&phi, probes, &j)? {
            Some(g) => push = g.scale_real(step),
            None => stop = true,
        }
        if best.as_ref().is_none_or(|(_, _, d)| dev > *d) {
            best = Some((phi, fix, dev));
        }
        if stop {
            break;
        }
    }
    let (phi, fix_residual, deviation) = best.expect("at least one stage runs");
    Ok(RestartOutcome {
        phi,
        log: RestartLog {
            epsilon,
            iterations,
            converged,
            final_change: change,
            polished,
            polish_iterations,
            fix_residual,
            deviation,
            stages: affine_distance.len(),
            affine_distance,
        },
    })
}

/// Runs the restarts and reports the largest probe deviation found.
///
/// A map is reported as a `Violated` witness only if it independently passes
/// the UCP check, fixes every generator within `fix_tol` and moves some probe
/// by more than `violation_tol`.
pub fn uep_check(s: &OperatorSystemM, probes: &[ComplexMatrix], params: &UepParams) -> Result<UepReport, UepError> {
    if params.restarts == 0 || params.epsilons.is_empty() || params.epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(UepError::BadParams(
            "need at least one restart and positive perturbation sizes".into(),
        ));
    }
    for (index, t) in probes.iter().enumerate() {
        if t.rows() != s.n || t.cols() != s.n {
            return Err(UepError::BadProbe { index, n: s.n });
        }
    }
    let proj = AffineProjector::new(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut logs = Vec::with_capacity(params.restarts);
    let mut best: Option<(ChoiMatrix, f64)> = None;
    let mut best_valid: Option<(ChoiMatrix, WitnessChecks)> = None;
    let mut total_iterations = 0;
    let mut final_residual: f64 = 0.0;
    for r in 0..params.restarts {
        let eps = params.epsilons[r % params.epsilons.len()];
        let out = run_restart(s, &proj, probes, params, eps, &mut rng)?;
        total_iterations += out.log.iterations;
        final_residual = final_residual.max(out.log.fix_residual);
        let dev = out.log.deviation;
        if dev > params.violation_tol {
            let checks = verify_witness(&out.phi, s, probes)?;
            let valid = checks.ucp.is_ucp
                && checks.max_generator_residual <= params.fix_tol
                && checks.deviation > params.violation_tol;
            let better = best_valid.as_ref().is_none_or(|(_, c)| checks.deviation > c.deviation);
            if valid && better {
                best_valid = Some((out.phi.clone(), checks));
            }
        }
        if best.as_ref().is_none_or(|(_, d)| dev > *d) {
            best = Some((out.phi, dev));
        }
        logs.push(out.log);
    }
    let deviation = best.as_ref().map_or(0.0, |(_, d)| *d);
    let all_converged = logs.iter().all(|l| l.converged);
    let (status, witness, witness_checks) = match best_valid {
        Some((phi, checks)) => (UepStatus::Violated, Some(phi), Some(checks)),
        None => (UepStatus::NoViolationFound, None, None),
    };
    Ok(UepReport {
        status,
        witness,
        witness_checks,
        deviation,
        probes: probes.to_vec(),
        restarts: params.restarts,
        iterations: total_iterations,
        final_residual,
        all_converged,
        seed: params.seed,
        restart_log: logs,
        note: EVIDENCE_NOTE,
    })
}

/// The lowest power `A^k` (`k ≥ 2`) outside the span of the system, if any
/// power up to `n` qualifies.
pub fn default_probe(s: &OperatorSystemM, a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let mut p = a.clone();
    for _ in 2..=s.n.max(2) {
        p = p.matmul(a);
        if !s.contains(&p) {
            return Some(p);
        }
    }
    None
}

/// For `A = diag(...)` with eigenvalues `λ1 < λ2 < λ3` chosen to maximize
/// `(λ2 - λ1)(λ3 - λ2)`: the diagonal map replacing evaluation at `λ2` by
/// `t·eval(λ1) + (1 - t)·eval(λ3)`, `t = (λ3 - λ2)/(λ3 - λ1)`, after pinching.
/// It fixes `1` and `A` and moves `A²` by `(λ2 - λ1)(λ3 - λ2)`.
pub fn convex_split_witness(a: &HermitianMatrix) -> Result<ChoiMatrix, UepError> {
    if !a.is_diagonal(0.0) {
        return Err(UepError::NotDiagonal);
    }
    let d = a.diag_real();
    let mut distinct = d.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(UepError::TooFewEigenvalues { found: distinct.len() });
    }
    let l1 = distinct[0];
    let l3 = distinct[distinct.len() - 1];
    let mut l2 = distinct[1];
    for &l in &distinct[1..distinct.len() - 1] {
        if (l - l1) * (l3 - l) > (l2 - l1) * (l3 - l2) {
            l2 = l;
        }
    }
    let t = (l3 - l2) / (l3 - l1);
    let n = d.len();
    let i1 = d.iter().position(|&x| x == l1).expect("present");
    let i3 = d.iter().position(|&x| x == l3).expect("present");
    let mut weights = vec![vec![0.0; n]; n];
    for (k, row) in weights.iter_mut().enumerate() {
        if d[k] == l2 {
            row[i1] = t;
            row[i3] = 1.0 - t;
        } else {
            row[k] = 1.0;
        }
    }
    Ok(choi_of_diagonal_map(&weights)?)
}

/// Re-checks the block-diagonal system `S1 ⊕ S2` after both summands were
/// reported as `NoViolationFound`. Probes are the block sums of the summand
/// probes (padded with zero blocks when one list is shorter).
pub fn direct_sum_check(
    s1: &OperatorSystemM,
    r1: &UepReport,
    s2: &OperatorSystemM,
    r2: &UepReport,
    params: &UepParams,
) -> Result<(OperatorSystemM, UepReport), UepError> {
    if r1.status != UepStatus::NoViolationFound {
        return Err(UepError::SummandViolated { index: 0 });
    }
    if r2.status != UepStatus::NoViolationFound {
        return Err(UepError::SummandViolated { index: 1 });
    }
    let s = s1.direct_sum(s2)?;
    let z1 = ComplexMatrix::zeros(s1.n, s1.n);
    let z2 = ComplexMatrix::zeros(s2.n, s2.n);
    let k = r1.probes.len().max(r2.probes.len());
    let probes: Vec<ComplexMatrix> = (0..k)
        .map(|i| {
            let p1 = r1.probes.get(i).unwrap_or(&z1);
            let p2 = r2.probes.get(i).unwrap_or(&z2);
            p1.direct_sum(p2)
        })
        .collect();
    let report = uep_check(&s, &probes, params)?;
    Ok((s, report))
}

/// `‖φ(A X) - A φ(X)‖`, which vanishes for `A` in the multiplicative domain.
pub fn multiplicative_defect(phi: &ChoiMatrix, a: &ComplexMatrix, x: &ComplexMatrix) -> Result<f64, UepError> {
    let lhs = phi.apply(&a.matmul(x))?;
    let rhs = a.matmul(&phi.apply(x)?);
    Ok(operator_norm(&(&lhs - &rhs)))
}
