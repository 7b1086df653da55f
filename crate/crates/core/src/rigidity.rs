//! Counterexamples to rigidity for functions that are neither strictly convex
//! nor strictly concave.
//!
//! If a graph point `(x0, f(x0))` is a convex combination `Σ t_k (x_k, f(x_k))`
//! of other graph points, then on `A = diag(x0, x1, ..., xn)` the map
//!
//! ```text
//! φ(λ0, λ1, ..., λn) = (Σ t_k λ_k, λ1, ..., λn)
//! ```
//!
//! composed with the pinching onto the diagonal is unital completely positive,
//! fixes `A` and `f(A)`, and moves `A²` by `Σ t_k x_k² - x0² > 0`.

use serde::Serialize;
use thiserror::Error;

use crate::choi::{choi_of_diagonal_map, ChoiError, ChoiMatrix, UcpDiagnostics};
use crate::expr::Expr;
use crate::function_system::{convex_hull, hull_tolerance, FunctionSystem, FunctionSystemError, GraphSample};
use crate::linalg::{apply_function, operator_norm, HermitianMatrix, LinalgError};

/// Residual allowed in the two linear constraints of a witness.
pub const WITNESS_TOL: f64 = 1e-10;
/// Largest support size of a witness.
pub const MAX_SUPPORT: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigidityError {
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error(transparent)]
    FunctionSystem(#[from] FunctionSystemError),
    #[error(transparent)]
    Choi(#[from] ChoiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `(x0, f(x0)) = Σ t_k (x_k, f(x_k))` with `t_k > 0`, `Σ t_k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaratheodoryWitness {
    pub x0: f64,
    /// `(x_k, t_k)` pairs, sorted by `x_k`.
    pub support: Vec<(f64, f64)>,
}

impl CaratheodoryWitness {
    /// `Σ t_k x_k² - x0²`, the deviation the counterexample map produces on `A²`.
    pub fn spread(&self) -> f64 {
        self.support.iter().map(|(x, t)| t * x * x).sum::<f64>() - self.x0 * self.x0
    }

    /// Checks the witness invariants against `f`.
    pub fn validate(&self, f: &Expr) -> Result<(), RigidityError> {
        let bad = |s: String| Err(RigidityError::InvalidWitness(s));
        if self.support.is_empty() || self.support.len() > MAX_SUPPORT {
            return bad(format!("support size {} not in 1..={MAX_SUPPORT}", self.support.len()));
        }
        for (i, &(x, t)) in self.support.iter().enumerate() {
            if !(t > 0.0) || !x.is_finite() {
                return bad(format!("support point ({x}, {t}) needs finite x and t > 0"));
            }
            if x == self.x0 {
                return bad(format!("support point {x} coincides with x0"));
            }
            if self.support[..i].iter().any(|&(y, _)| y == x) {
                return bad(format!("support point {x} repeated"));
            }
        }
        let mass: f64 = self.support.iter().map(|(_, t)| t).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return bad(format!("weights sum to {mass}"));
        }
        let mean: f64 = self.support.iter().map(|(x, t)| t * x).sum();
        if (mean - self.x0).abs() > WITNESS_TOL {
            return bad(format!("barycenter {mean} differs from x0 = {}", self.x0));
        }
        let f0 = f.eval(self.x0).map_err(FunctionSystemError::from)?;
        let mut fmean = 0.0;
        for &(x, t) in &self.support {
            fmean += t * f.eval(x).map_err(FunctionSystemError::from)?;
        }
        if (fmean - f0).abs() > WITNESS_TOL {
            return bad(format!("f-barycenter {fmean} differs from f(x0) = {f0}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub witness: CaratheodoryWitness,
    pub a: HermitianMatrix,
    pub phi: ChoiMatrix,
    /// `‖φ(A) - A‖`
    pub residual_fix_a: f64,
    /// `‖φ(f(A)) - f(A)‖`
    pub residual_fix_fa: f64,
    /// `‖φ(A²) - φ(A)²‖`
    pub deviation: f64,
    pub ucp: UcpDiagnostics,
}

impl CounterexampleReport {
    pub fn dimension(&self) -> usize {
        self.a.dim()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Every sampled graph point is extreme at this resolution.
    RigidCandidate,
    NotRigid {
        report: Box<CounterexampleReport>,
    },
}

struct Candidate {
    witness: CaratheodoryWitness,
    spread: f64,
}

/// Searches the sampled graph for a point that is a convex combination of
/// other sampled graph points.
///
/// Candidates are the grid points that are not hull vertices. For each one,
/// supports are drawn from the hull vertices: first two-point chords through
/// the candidate (collinearity residual at most `WITNESS_TOL`), then, if no
/// chord exists anywhere, three-point triangles of a fan triangulation that
/// contain the candidate by more than the hull tolerance. Within the smallest
/// support size found, the witness with the largest spread `Σ t x² - x0²` wins,
/// with ties going to the leftmost `x0`.
pub fn find_nonextreme_point(fs: &FunctionSystem) -> Result<Option<CaratheodoryWitness>, RigidityError> {
    let sample = fs.sample()?;
    Ok(search_sample(&sample))
}

fn search_sample(sample: &GraphSample) -> Option<CaratheodoryWitness> {
    let pts = &sample.points;
    let tol = hull_tolerance(sample);
    let hull = convex_hull(pts, tol);
    let mut is_vertex = vec![false; pts.len()];
    for &i in &hull {
        is_vertex[i] = true;
    }
    let candidates: Vec<usize> = (0..pts.len()).filter(|&i| !is_vertex[i]).collect();
    if candidates.is_empty() {
        return None;
    }
    let mut vertices = hull.clone();
    vertices.sort_by(|&i, &j| pts[i][0].total_cmp(&pts[j][0]));

    let mut best: Option<Candidate> = None;
    for &c in &candidates {
        let [x0, y0] = pts[c];
        for (a_pos, &p) in vertices.iter().enumerate() {
            let [xp, yp] = pts[p];
            if xp >= x0 {
                break;
            }
            for &q in &vertices[a_pos + 1..] {
                let [xq, yq] = pts[q];
                if xq <= x0 {
                    continue;
                }
                let t = (xq - x0) / (xq - xp);
                let s = 1.0 - t;
                if (t * yp + s * yq - y0).abs() > WITNESS_TOL {
                    continue;
                }
                let witness = CaratheodoryWitness {
                    x0,
                    support: vec![(xp, t), (xq, s)],
                };
                let spread = witness.spread();
                offer(&mut best, Candidate { witness, spread });
            }
        }
    }
    if best.is_none() {
        // Fan triangulation of the hull polygon from its first vertex.
        for &c in &candidates {
            let q = pts[c];
            for k in 1..hull.len().saturating_sub(1) {
                let tri = [hull[0], hull[k], hull[k + 1]];
                let [a, b, d] = tri.map(|i| pts[i]);
                let area = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
                if area <= 0.0 {
                    continue;
                }
                let l1 = ((b[0] - q[0]) * (d[1] - q[1]) - (b[1] - q[1]) * (d[0] - q[0])) / area;
                let l2 = ((d[0] - q[0]) * (a[1] - q[1]) - (d[1] - q[1]) * (a[0] - q[0])) / area;
                let l3 = 1.0 - l1 - l2;
                let edge_margin = [l1 * area / dist(b, d), l2 * area / dist(d, a), l3 * area / dist(a, b)];
                if edge_margin.iter().any(|&m| m <= tol) {
                    continue;
                }
                let mut support: Vec<(f64, f64)> = vec![(a[0], l1), (b[0], l2), (d[0], l3)];
                support.sort_by(|u, v| u.0.total_cmp(&v.0));
                let witness = CaratheodoryWitness { x0: q[0], support };
                let mean: f64 = witness.support.iter().map(|(x, t)| x * t).sum();
                if (mean - q[0]).abs() > WITNESS_TOL {
                    continue;
                }
                let spread = witness.spread();
                offer(&mut best, Candidate { witness, spread });
                break;
            }
        }
    }
    best.map(|b| b.witness)
}

fn offer(best: &mut Option<Candidate>, c: Candidate) {
    let better = match best {
        None => true,
        Some(b) => c.spread > b.spread + 1e-12 || ((c.spread - b.spread).abs() <= 1e-12 && c.witness.x0 < b.witness.x0),
    };
    if better {
        *best = Some(c);
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Builds `A = diag(x0, x1, ..., xn)` and the diagonal map that averages the
/// support into the first coordinate, then measures everything through the
/// Choi matrix.
pub fn build_counterexample(w: &CaratheodoryWitness, f: &Expr) -> Result<CounterexampleReport, RigidityError> {
    w.validate(f)?;
    let n = w.support.len() + 1;
    let mut diag = vec![w.x0];
    diag.extend(w.support.iter().map(|(x, _)| *x));
    let a = HermitianMatrix::from_real_diag(&diag);

    let mut weights = vec![vec![0.0; n]; n];
    for (k, &(_, t)) in w.support.iter().enumerate() {
        weights[0][k + 1] = t;
        weights[k + 1][k + 1] = 1.0;
    }
    // Rounding can leave the first row a few ulps away from mass 1.
    let mass: f64 = weights[0].iter().sum();
    for t in weights[0].iter_mut() {
        *t /= mass;
    }
    let phi = choi_of_diagonal_map(&weights)?;

    let fa = apply_function(&a, |x| f.eval(x).unwrap_or(f64::NAN))?;
    let a2 = a.as_matrix().matmul(a.as_matrix());
    let phi_a = phi.apply(a.as_matrix())?;
    let phi_fa = phi.apply(fa.as_matrix())?;
    let phi_a2 = phi.apply(&a2)?;
    let residual_fix_a = operator_norm(&(&phi_a - a.as_matrix()));
    let residual_fix_fa = operator_norm(&(&phi_fa - fa.as_matrix()));
    let deviation = operator_norm(&(&phi_a2 - &phi_a.matmul(&phi_a)));
    let ucp = phi.is_ucp();
    Ok(CounterexampleReport {
        witness: w.clone(),
        a,
        phi,
        residual_fix_a,
        residual_fix_fa,
        deviation,
        ucp,
    })
}

pub fn rigidity_verdict(fs: &FunctionSystem) -> Result<Verdict, RigidityError> {
    match find_nonextreme_point(fs)? {
        None => Ok(Verdict::RigidCandidate),
        Some(w) => Ok(Verdict::NotRigid {
            report: Box::new(build_counterexample(&w, fs.f())?),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::linalg::ComplexMatrix;

    fn fs(f: &str, a: f64, b: f64, m: usize) -> FunctionSystem {
        FunctionSystem::new(a, b, parse(f).unwrap(), m).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn abs_kink_witness() {
        let w = find_nonextreme_point(&fs("abs(x-1/2)", 0.0, 1.0, 101))
            .unwrap()
            .unwrap();
        assert!(close(w.x0, 0.25));
        assert_eq!(w.support.len(), 2);
        assert!(close(w.support[0].0, 0.0) && close(w.support[0].1, 0.5));
        assert!(close(w.support[1].0, 0.5) && close(w.support[1].1, 0.5));
    }

    #[test]
    fn cubic_witness() {
        let w = find_nonextreme_point(&fs("x^3", -1.0, 1.0, 101)).unwrap().unwrap();
        assert!(close(w.x0, 0.0));
        assert_eq!(w.support, vec![(-1.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn parabola_has_no_witness() {
        assert!(find_nonextreme_point(&fs("x^2", 0.0, 1.0, 101)).unwrap().is_none());
    }

    #[test]
    fn abs_counterexample_matrices() {
        let f = parse("abs(x-1/2)").unwrap();
        let w = CaratheodoryWitness {
            x0: 0.25,
            support: vec![(0.0, 0.5), (0.5, 0.5)],
        };
        let r = build_counterexample(&w, &f).unwrap();
        assert_eq!(r.a.diag_real(), vec![0.25, 0.0, 0.5]);
        let a = r.a.as_matrix();
        let phi_a2 = r.phi.apply(&a.matmul(a)).unwrap();
        let phi_a = r.phi.apply(a).unwrap();
        assert!((&phi_a2 - &ComplexMatrix::from_real_diag(&[0.125, 0.0, 0.25])).max_abs() < 1e-15);
        assert!((&phi_a.matmul(&phi_a) - &ComplexMatrix::from_real_diag(&[0.0625, 0.0, 0.25])).max_abs() < 1e-15);
        assert!((r.deviation - 0.0625).abs() < 1e-12);
        assert!(r.residual_fix_a <= 1e-12 && r.residual_fix_fa <= 1e-12);
        assert!(r.ucp.is_ucp);
    }

    #[test]
    fn cubic_counterexample_matrices() {
        let f = parse("x^3").unwrap();
        let w = CaratheodoryWitness {
            x0: 0.0,
            support: vec![(-1.0, 0.5), (1.0, 0.5)],
        };
        let r = build_counterexample(&w, &f).unwrap();
        assert_eq!(r.a.diag_real(), vec![0.0, -1.0, 1.0]);
        assert!((r.deviation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_witnesses_are_rejected() {
        let f = parse("x^2").unwrap();
        let at_x0 = CaratheodoryWitness {
            x0: 0.5,
            support: vec![(0.5, 1.0)],
        };
        assert!(matches!(
            build_counterexample(&at_x0, &f),
            Err(RigidityError::InvalidWitness(_))
        ));
        let off_graph = CaratheodoryWitness {
            x0: 0.5,
            support: vec![(0.0, 0.5), (1.0, 0.5)],
        };
        assert!(matches!(
            build_counterexample(&off_graph, &f),
            Err(RigidityError::InvalidWitness(_))
        ));
    }

    #[test]
    fn verdicts() {
        assert!(matches!(
            rigidity_verdict(&fs("x^2", 0.0, 1.0, 101)).unwrap(),
            Verdict::RigidCandidate
        ));
        match rigidity_verdict(&fs("x^3", -1.0, 1.0, 101)).unwrap() {
            Verdict::NotRigid { report } => assert!((report.deviation - 1.0).abs() < 1e-9),
            v => panic!("unexpected {v:?}"),
        }
        assert!(matches!(
            rigidity_verdict(&fs("2*x + 1", 0.0, 1.0, 41)).unwrap(),
            Verdict::NotRigid { .. }
        ));
    }

    #[test]
    fn triangle_supports_when_no_chord_exists() {
        // sin has no three collinear grid points here, so an inflection can
        // only be witnessed by a triangle.
        let s = fs("sin(7*x)", 0.0, 1.0, 23);
        let w = find_nonextreme_point(&s).unwrap().unwrap();
        w.validate(s.f()).unwrap();
        assert!(w.support.len() <= 3);
        let r = build_counterexample(&w, s.f()).unwrap();
        assert!(r.deviation > 1e-6 && r.dimension() <= 7);
    }

    // Every emitted report re-verified through the Choi matrix alone.
    #[test]
    fn emitted_reports_verify_independently() {
        for (f, a, b) in [
            ("abs(x-1/2)", 0.0, 1.0),
            ("x^3", -1.0, 1.0),
            ("sin(7*x)", 0.0, 1.0),
            ("x*(1-x)*(x-1/3)", 0.0, 1.0),
            ("abs(x) - abs(x-1)", -1.0, 2.0),
        ] {
            let s = fs(f, a, b, 61);
            let Verdict::NotRigid { report } = rigidity_verdict(&s).unwrap() else {
                panic!("{f} should not be rigid");
            };
            assert!(report.dimension() <= 7);
            assert!(report.phi.is_ucp().is_ucp);
            let am = report.a.as_matrix();
            let fa = ComplexMatrix::from_real_diag(
                &report
                    .a
                    .diag_real()
                    .iter()
                    .map(|&x| s.f().eval(x).unwrap())
                    .collect::<Vec<_>>(),
            );
            assert!(operator_norm(&(&report.phi.apply(am).unwrap() - am)) <= 1e-10, "{f}");
            assert!(operator_norm(&(&report.phi.apply(&fa).unwrap() - &fa)) <= 1e-10, "{f}");
            let pa = report.phi.apply(am).unwrap();
            let gap = &report.phi.apply(&am.matmul(am)).unwrap() - &pa.matmul(&pa);
            assert!(operator_norm(&gap) > 1e-6, "{f}");
        }
    }
}
