//! Concrete operator examples: a discretized Volterra operator, the state
//! that annihilates `span{V, V†}`, random unitary generators and an
//! almost-domination check.
//!
//! All Volterra results are discretization evidence for the behaviour of the
//! integral operator, not statements about it.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    eig_hermitian, max_eigenvalue, min_eigenvalue, singular_values, ComplexMatrix, HermitianMatrix, LinalgError, C64,
};
use crate::minimax::{simplex_solve, LpError, LpProblem, LpStatus, Relation, Sense};
use crate::uep::{hermitian_basis_of, uep_check, OperatorSystemM, UepError, UepParams, UepReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("size {n} is below the minimum {min}")]
    TooSmall { n: usize, min: usize },
    #[error("A² ≤ cA fails: cA - A² has eigenvalue {eigenvalue:e}")]
    ConstantTooSmall { eigenvalue: f64 },
    #[error("compressed imaginary part is one-signed (spectrum in [{min:e}, {max:e}])")]
    OneSigned { min: f64, max: f64 },
    #[error("not a state: {0}")]
    NotAState(String),
    #[error("generated algebra is proper (commutant dimension {commutant_dimension}) after {attempts} draws")]
    ProperAlgebra {
        commutant_dimension: usize,
        attempts: usize,
    },
    #[error("demo supports 1 ≤ n ≤ 6 and 1 ≤ k ≤ 3, got n = {n}, k = {k}")]
    DemoSize { n: usize, k: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Uep(#[from] UepError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

const DISCRETIZATION_NOTE: &str =
    "finite discretization evidence for the Volterra operator, not a statement about the operator itself";

/// Midpoint discretization of `Vf(x) = ∫_0^x f(t) dt` with its Cartesian
/// decomposition `V = A + iB`.
#[derive(Debug, Clone, Serialize)]
pub struct VolterraDiscretization {
    pub n: usize,
    pub v: ComplexMatrix,
    pub a: HermitianMatrix,
    pub b: HermitianMatrix,
}

/// `V[i][j] = 1/n` below the diagonal, `1/(2n)` on it. The real part is then
/// exactly `(1/2n)·(all ones)`, a rank-one matrix with eigenvalue `1/2`.
pub fn discretize_volterra(n: usize) -> Result<VolterraDiscretization, LabError> {
    if n < 2 {
        return Err(LabError::TooSmall { n, min: 2 });
    }
    let h = 1.0 / n as f64;
    let v = ComplexMatrix::from_fn(n, n, |i, j| {
        C64::new(
            match j.cmp(&i) {
                std::cmp::Ordering::Less => h,
                std::cmp::Ordering::Equal => h / 2.0,
                std::cmp::Ordering::Greater => 0.0,
            },
            0.0,
        )
    });
    let a = v.hermitian_part();
    let b = v.skew_hermitian_part();
    Ok(VolterraDiscretization { n, v, a, b })
}

/// `-1/((2k+1)π)`.
pub fn volterra_eigenvalue(k: i64) -> f64 {
    -1.0 / ((2 * k + 1) as f64 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenMatch {
    pub k: i64,
    pub target: f64,
    pub computed: f64,
    pub relative_error: f64,
}

/// For each `k`, the eigenvalue nearest `volterra_eigenvalue(k)`.
pub fn nearest_matches(eigenvalues: &[f64], ks: &[i64]) -> Vec<EigenMatch> {
    ks.iter()
        .map(|&k| {
            let target = volterra_eigenvalue(k);
            let computed = eigenvalues
                .iter()
                .copied()
                .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
                .unwrap_or(f64::NAN);
            EigenMatch {
                k,
                target,
                computed,
                relative_error: ((computed - target) / target).abs(),
            }
        })
        .collect()
}

/// The ten targets of largest magnitude: `k = -5..=4`.
pub const MATCHED_KS: [i64; 10] = [0, -1, 1, -2, 2, -3, 3, -4, 4, -5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealPartCheck {
    pub top: f64,
    /// Largest `|λ|` among the remaining eigenvalues.
    pub rest: f64,
    /// `max(|top - 1/2|, rest)`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchattenRow {
    pub n: usize,
    pub p1: f64,
    pub p1_5: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolterraReport {
    pub n: usize,
    pub real_part: RealPartCheck,
    pub matches: Vec<EigenMatch>,
    /// Sums `Σ s_j^p` of singular values at `n/4, n/2, n`.
    pub schatten: Vec<SchattenRow>,
    /// `‖V‖_HS² = 1/2` for the integral operator.
    pub hilbert_schmidt_limit: f64,
    pub note: &'static str,
}

pub fn real_part_check(d: &VolterraDiscretization) -> Result<RealPartCheck, LabError> {
    let e = eig_hermitian(&d.a)?;
    let top = e.max();
    let rest = e.values[..d.n - 1].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(RealPartCheck {
        top,
        rest,
        residual: (top - 0.5).abs().max(rest),
    })
}

pub fn schatten_row(n: usize) -> Result<SchattenRow, LabError> {
    let d = discretize_volterra(n)?;
    let s = singular_values(&d.v);
    let sum = |p: f64| s.iter().map(|v| v.powf(p)).sum::<f64>();
    Ok(SchattenRow {
        n,
        p1: sum(1.0),
        p1_5: sum(1.5),
        p2: sum(2.0),
    })
}

pub fn volterra_spectral_report(n: usize) -> Result<VolterraReport, LabError> {
    if n < 16 {
        return Err(LabError::TooSmall { n, min: 16 });
    }
    let d = discretize_volterra(n)?;
    let real_part = real_part_check(&d)?;
    let eig_b = eig_hermitian(&d.b)?;
    let matches = nearest_matches(&eig_b.values, &MATCHED_KS);
    let schatten = [n / 4, n / 2, n]
        .into_iter()
        .map(schatten_row)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VolterraReport {
        n,
        real_part,
        matches,
        schatten,
        hilbert_schmidt_limit: 0.5,
        note: DISCRETIZATION_NOTE,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeElement {
    pub s: HermitianMatrix,
    /// `-λ_max(s)`; positive exactly when `s` is strictly negative.
    pub margin: f64,
    pub strictly_negative: bool,
}

/// `s = -cA + (A² - B²)`, after checking `A² ≤ cA`. Then `s ≤ -B²`.
pub fn strictly_negative_element(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    c: f64,
) -> Result<NegativeElement, LabError> {
    if a.dim() != b.dim() {
        return Err(LabError::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    let a2 = a.as_matrix().matmul(a.as_matrix()).hermitian_part();
    let b2 = b.as_matrix().matmul(b.as_matrix()).hermitian_part();
    let gap = a.scale(c).sub(&a2);
    let low = min_eigenvalue(&gap)?;
    let scale = 1.0 + a.as_matrix().max_abs().powi(2) * a.dim() as f64;
    if low < -1e-12 * scale {
        return Err(LabError::ConstantTooSmall { eigenvalue: low });
    }
    let s = a.scale(-c).add(&a2).sub(&b2);
    let margin = -max_eigenvalue(&s)?;
    Ok(NegativeElement {
        s,
        margin,
        strictly_negative: margin > 0.0,
    })
}

/// A density matrix: PSD with unit trace.
#[derive(Debug, Clone, Serialize)]
pub struct StateVector {
    pub density: HermitianMatrix,
}

impl StateVector {
    pub fn new(density: HermitianMatrix) -> Result<Self, LabError> {
        let low = min_eigenvalue(&density)?;
        let tr = density.as_matrix().trace().re;
        if low < -1e-12 {
            return Err(LabError::NotAState(format!("min eigenvalue {low:e}")));
        }
        if (tr - 1.0).abs() > 1e-12 {
            return Err(LabError::NotAState(format!("trace {tr}")));
        }
        Ok(Self { density })
    }

    /// `tr(ρX)`.
    pub fn expect(&self, x: &ComplexMatrix) -> C64 {
        let r = self.density.as_matrix();
        let n = r.rows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += r[(i, j)] * x[(j, i)];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionWitness {
    pub state: StateVector,
    /// Extreme eigenvalues of `QBQ`.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub rho_a: f64,
    pub rho_b: f64,
    pub rho_one: f64,
    /// `ρ(V² + V²†)`.
    pub rho_v2_sym: f64,
    /// `λ_min(B²)`, the margin of the strictly negative element built from
    /// the `V²`-augmented system.
    pub negative_margin: f64,
    pub note: &'static str,
}

/// With `Q` the projection onto `ker A` and `ξ±` top and bottom eigenvectors
/// of `QBQ`, the state `ρ = t ω_{ξ+} + (1-t) ω_{ξ-}` balanced so that
/// `ρ(B) = 0`. It also kills `A`, hence all of `span{1, V, V†}` except the
/// unit.
pub fn obstruction_state(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(StateVector, f64, f64), LabError> {
    let n = a.dim();
    let ea = eig_hermitian(a)?;
    let top = ea.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n {
        if ea.values[k].abs() > 1e-10 * top.max(f64::MIN_POSITIVE) {
            let u = ea.vector(k);
            q = &q - &ComplexMatrix::from_fn(n, n, |i, j| u[i] * u[j].conj());
        }
    }
    let qbq = q.matmul(b.as_matrix()).matmul(&q).hermitian_part();
    let e = eig_hermitian(&qbq)?;
    let (lm, lp) = (e.min(), e.max());
    let tol = 1e-12 * (1.0 + b.as_matrix().max_abs());
    if lp <= tol || lm >= -tol {
        return Err(LabError::OneSigned { min: lm, max: lp });
    }
    let (xp, xm) = (e.vector(n - 1), e.vector(0));
    let t = -lm / (lp - lm);
    let rho = ComplexMatrix::from_fn(n, n, |i, j| xp[i] * xp[j].conj() * t + xm[i] * xm[j].conj() * (1.0 - t));
    let state = StateVector::new(rho.hermitian_part())?;
    Ok((state, lp, lm))
}

pub fn infinity_obstruction_witness(d: &VolterraDiscretization) -> Result<ObstructionWitness, LabError> {
    let (state, lambda_plus, lambda_minus) = obstruction_state(&d.a, &d.b)?;
    let v2 = d.v.matmul(&d.v);
    let v2_sym = &v2 + &v2.adjoint();
    let neg = strictly_negative_element(&d.a, &d.b, 0.5)?;
    let b2 = d.b.as_matrix().matmul(d.b.as_matrix()).hermitian_part();
    Ok(ObstructionWitness {
        rho_a: state.expect(d.a.as_matrix()).re,
        rho_b: state.expect(d.b.as_matrix()).re,
        rho_one: state.expect(&ComplexMatrix::identity(d.n)).re,
        rho_v2_sym: state.expect(&v2_sym).re,
        negative_margin: neg.margin.min(min_eigenvalue(&b2)?),
        lambda_plus,
        lambda_minus,
        state,
        note: DISCRETIZATION_NOTE,
    })
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `R`'s diagonal absorbed so the diagonal is positive.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)) / std::f64::consts::SQRT_2
    });
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            let ck = cols[k].clone();
            for (v, c) in cols[j].iter_mut().zip(&ck) {
                *v -= proj * c;
            }
        }
        let norm = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Dimension of `{X : X U = U X for every U}`, read off the kernel of
/// `Σ L_U† L_U` with `L_U(X) = UX - XU`.
pub fn commutant_dimension(ops: &[ComplexMatrix]) -> Result<usize, LabError> {
    let n = ops.first().map_or(0, ComplexMatrix::rows);
    let d = n * n;
    let mut m = ComplexMatrix::zeros(d, d);
    let id = ComplexMatrix::identity(n);
    for u in ops {
        if u.rows() != n || u.cols() != n {
            return Err(LabError::DimensionMismatch("operators must share one size".into()));
        }
        // Row-major vec: vec(UX) = (U ⊗ I) vec X, vec(XU) = (I ⊗ Uᵀ) vec X.
        let l = &u.kron(&id) - &id.kron(&u.transpose());
        m = &m + &l.adjoint().matmul(&l);
    }
    let e = eig_hermitian(&m.hermitian_part())?;
    let scale = e.max().max(1.0);
    Ok(e.values.iter().filter(|&&v| v <= 1e-9 * scale).count())
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitaryDemo {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Draws discarded because the unitaries generated a proper subalgebra.
    pub redraws: usize,
    pub commutant_dimension: usize,
    pub unitaries: Vec<ComplexMatrix>,
    pub report: UepReport,
}

pub const MAX_DRAWS: usize = 10;

/// `S = span{1, U_j, U_j†, Σ U_j U_j†}` for the given unitaries, after
/// checking that they generate all of `M_n`.
pub fn unitary_system(unitaries: &[ComplexMatrix]) -> Result<OperatorSystemM, LabError> {
    let n = unitaries.first().map_or(0, ComplexMatrix::rows);
    let dim = commutant_dimension(unitaries)?;
    if dim != 1 {
        return Err(LabError::ProperAlgebra {
            commutant_dimension: dim,
            attempts: 1,
        });
    }
    Ok(OperatorSystemM::new(n, unitary_generators(unitaries))?)
}

fn unitary_generators(unitaries: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let n = unitaries[0].rows();
    let mut gens = vec![ComplexMatrix::identity(n)];
    let mut sum = ComplexMatrix::zeros(n, n);
    for u in unitaries {
        gens.push(u.clone());
        gens.push(u.adjoint());
        sum = &sum + &u.matmul(&u.adjoint());
    }
    gens.push(sum);
    gens
}

/// Seeded random unitary generators and a UEP search on the system they
/// span, with probes `U_1 U_2` (when `k ≥ 2`), `U_1²` and a random Hermitian
/// matrix.
pub fn unitary_generator_demo(n: usize, k: usize, seed: u64, params: &UepParams) -> Result<UnitaryDemo, LabError> {
    if !(1..=6).contains(&n) || !(1..=3).contains(&k) {
        return Err(LabError::DemoSize { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_dim = 0;
    for attempt in 0..MAX_DRAWS {
        let us: Vec<ComplexMatrix> = (0..k).map(|_| haar_unitary(n, &mut rng)).collect();
        let dim = commutant_dimension(&us)?;
        last_dim = dim;
        if dim != 1 {
            continue;
        }
        let s = OperatorSystemM::new(n, unitary_generators(&us))?;
        let mut probes = Vec::new();
        if k >= 2 {
            probes.push(us[0].matmul(&us[1]));
        }
        probes.push(us[0].matmul(&us[0]));
        let h = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        probes.push(h.hermitian_part().into_matrix());
        let report = uep_check(&s, &probes, &UepParams { seed, ..params.clone() })?;
        return Ok(UnitaryDemo {
            n,
            k,
            seed,
            redraws: attempt,
            commutant_dimension: dim,
            unitaries: us,
            report,
        });
    }
    Err(LabError::ProperAlgebra {
        commutant_dimension: last_dim,
        attempts: MAX_DRAWS,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationParams {
    /// Coefficients are searched in `[-radius, radius]^d`.
    pub radius: f64,
    pub max_iterations: usize,
    /// Stop once upper and lower bounds on the optimum are this close.
    pub gap_tol: f64,
}

impl Default for DominationParams {
    fn default() -> Self {
        Self {
            radius: 1e3,
            max_iterations: 300,
            gap_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonOutcome {
    pub epsilon: f64,
    /// `λ_max(p - s - ε)` at the best `s` found.
    pub margin: f64,
    /// Lower bound on the margin over the whole search box.
    pub margin_lower_bound: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// Best value of `λ_max(p - s)` found, and a certified lower bound for it
    /// over the search box.
    pub best: f64,
    pub lower_bound: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub outcomes: Vec<EpsilonOutcome>,
    pub success: bool,
}

/// Searches for Hermitian `s` in the real span of the Hermitian and
/// skew-Hermitian parts of `space` with `s + ε·1 ≥ p`, i.e. minimizes the
/// convex function `λ_max(p - s)` over the coefficients of `s`. Kelley's
/// cutting planes on the box: each iterate adds the supporting hyperplane
/// from the top eigenvector, and the LP value is a lower bound.
pub fn almost_dominated_check(
    space: &[ComplexMatrix],
    p: &HermitianMatrix,
    eps_list: &[f64],
    params: &DominationParams,
) -> Result<DominationReport, LabError> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !e.is_finite()) {
        return Err(LabError::BadParams("need a non-empty list of finite epsilons".into()));
    }
    if !(params.radius > 0.0) || params.max_iterations == 0 {
        return Err(LabError::BadParams("radius and iteration cap must be positive".into()));
    }
    let n = p.dim();
    if space.iter().any(|g| g.rows() != n || g.cols() != n) {
        return Err(LabError::DimensionMismatch(format!("space elements must be {n}x{n}")));
    }
    if min_eigenvalue(p)? < -1e-12 {
        return Err(LabError::BadParams("p must be positive semidefinite".into()));
    }
    let basis = hermitian_basis_of(space);
    let d = basis.len();
    let eval = |c: &[f64]| -> Result<(f64, Vec<f64>), LabError> {
        let mut m = p.clone();
        for (g, &ca) in basis.iter().zip(c) {
            m = m.sub(&g.scale(ca));
        }
        let e = eig_hermitian(&m)?;
        let v = e.vector(n - 1);
        let grad = basis
            .iter()
            .map(|g| {
                let gm = g.as_matrix();
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += (v[i].conj() * gm[(i, j)] * v[j]).re;
                    }
                }
                -acc
            })
            .collect();
        Ok((e.max(), grad))
    };

    let mut c = vec![0.0; d];
    let (mut best, _) = eval(&c)?;
    let mut best_c = c.clone();
    let mut lower = f64::NEG_INFINITY;
    let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut converged = d == 0;
    if d == 0 {
        lower = best;
    }
    while d > 0 && iterations < params.max_iterations {
        iterations += 1;
        let (f, g) = eval(&c)?;
        if f < best {
            best = f;
            best_c = c.clone();
        }
        // t ≥ f + g·(c' - c)  ⇔  -g·c' + t ≥ f - g·c
        let offset = f - g.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        cuts.push((g, offset));
        let mut objective = vec![0.0; d + 1];
        objective[d] = 1.0;
        let mut lp = LpProblem::new(Sense::Minimize, objective).all_free();
        for (g, off) in &cuts {
            let mut row: Vec<f64> = g.iter().map(|v| -v).collect();
            row.push(1.0);
            lp = lp.subject_to(row, Relation::Ge, *off);
        }
        for a in 0..d {
            let mut row = vec![0.0; d + 1];
            row[a] = 1.0;
            lp = lp.subject_to(row.clone(), Relation::Le, params.radius);
            lp = lp.subject_to(row, Relation::Ge, -params.radius);
        }
        let sol = simplex_solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            break;
        }
        lower = lower.max(sol.value);
        c = sol.x[..d].to_vec();
        if best - lower <= params.gap_tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
    }
    let outcomes: Vec<EpsilonOutcome> = eps_list
        .iter()
        .map(|&epsilon| EpsilonOutcome {
            epsilon,
            margin: best - epsilon,
            margin_lower_bound: lower - epsilon,
            success: best - epsilon <= 0.0,
        })
        .collect();
    Ok(DominationReport {
        best,
        lower_bound: lower,
        coefficients: best_c,
        iterations,
        converged,
        success: outcomes.iter().all(|o| o.success),
        outcomes,
    })
}
