//! The three-dimensional function system `span{1, u, f}` on an interval,
//! sampled on a uniform grid.
//!
//! Everything here is grid-relative: convexity is read off second differences
//! and boundary points are extreme points of the convex hull of the sampled
//! graph. Refining the grid is the only way to gain confidence about the
//! continuum; see [`FunctionSystem::refinement_is_stable`].

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, ExprError};

/// Relative collinearity tolerance of the hull (scaled by the coordinate scale).
pub const HULL_TOL: f64 = 1e-9;
/// Relative tolerance on second differences (scaled by the value scale).
pub const CONVEXITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionSystemError {
    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    BadInterval { a: f64, b: f64 },
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSystem {
    a: f64,
    b: f64,
    f: Expr,
    m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSample {
    pub points: Vec<[f64; 2]>,
}

impl GraphSample {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[1]).collect()
    }

    /// Largest absolute coordinate, at least 1.
    pub fn scale(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| [p[0].abs(), p[1].abs()])
            .fold(1.0, f64::max)
    }
}

impl FunctionSystem {
    pub fn new(a: f64, b: f64, f: Expr, m: usize) -> Result<Self, FunctionSystemError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(FunctionSystemError::BadInterval { a, b });
        }
        if m < 3 {
            return Err(FunctionSystemError::GridTooSmall(m));
        }
        Ok(Self { a, b, f, m })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn with_resolution(&self, m: usize) -> Result<Self, FunctionSystemError> {
        Self::new(self.a, self.b, self.f.clone(), m)
    }

    /// `x_i = a + i (b - a) / (m - 1)`; the last point is exactly `b`.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.b - self.a) / (self.m - 1) as f64;
        (0..self.m)
            .map(|i| {
                if i + 1 == self.m {
                    self.b
                } else {
                    self.a + i as f64 * step
                }
            })
            .collect()
    }

    pub fn sample(&self) -> Result<GraphSample, FunctionSystemError> {
        let points = self
            .grid()
            .into_iter()
            .map(|x| Ok([x, self.f.eval(x)?]))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(GraphSample { points })
    }

    /// Boundary flags at resolution `m` agree with those at `2m - 1` on the
    /// shared grid points.
    pub fn refinement_is_stable(&self) -> Result<bool, FunctionSystemError> {
        let coarse = choquet_boundary(self)?;
        let fine = choquet_boundary(&self.with_resolution(2 * self.m - 1)?)?;
        Ok(coarse
            .points
            .iter()
            .zip(fine.points.iter().step_by(2))
            .all(|(c, f)| c.boundary == f.boundary))
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Andrew's monotone chain. Returns indices of hull vertices in
/// counterclockwise order starting at the lexicographically smallest point.
///
/// A point is a vertex only if it lies farther than `tol` from the segment
/// joining its hull neighbours, so near-collinear points are dropped.
/// Duplicate points are reported once (the first index).
pub fn convex_hull(points: &[[f64; 2]], tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
            .then(i.cmp(&j))
    });
    idx.dedup_by(|j, i| points[*i] == points[*j]);
    if idx.len() <= 2 {
        return idx;
    }
    let turns_left = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (points[o], points[a], points[b]);
        cross(o, a, b) > tol * dist(o, b)
    };
    let mut lower: Vec<usize> = Vec::new();
    for &p in &idx {
        while lower.len() >= 2 && !turns_left(lower[lower.len() - 2], lower[lower.len() - 1], p) {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &p in idx.iter().rev() {
        while upper.len() >= 2 && !turns_left(upper[upper.len() - 2], upper[upper.len() - 1], p) {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && points[lower[0]] == points[lower[1]] {
        lower.truncate(1);
    }
    lower
}

/// Default hull tolerance for a sample: `HULL_TOL` times its coordinate scale.
pub fn hull_tolerance(sample: &GraphSample) -> f64 {
    HULL_TOL * sample.scale()
}

/// Default convexity tolerance: `CONVEXITY_TOL` times `max(1, max |f|)`.
pub fn convexity_tolerance(sample: &GraphSample) -> f64 {
    CONVEXITY_TOL * sample.ys().iter().fold(1.0_f64, |s, y| s.max(y.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Convexity {
    StrictlyConvex,
    StrictlyConcave,
    /// `witness` is the grid triple with the smallest `|D_i|`; it violates
    /// both strict inequalities whenever some `|D_i| <= tol`, otherwise the
    /// sign of `D` changes and `not_convex_at` / `not_concave_at` locate it.
    Neither {
        witness: [f64; 3],
        second_difference: f64,
        not_convex_at: f64,
        not_concave_at: f64,
    },
}

/// Classifies by the second differences `D_i = f(x_{i-1}) - 2 f(x_i) + f(x_{i+1})`.
pub fn classify_convexity(fs: &FunctionSystem, tol: f64) -> Result<Convexity, FunctionSystemError> {
    let s = fs.sample()?;
    Ok(classify_sample(&s, tol))
}

pub fn classify_sample(s: &GraphSample, tol: f64) -> Convexity {
    let p = &s.points;
    let d: Vec<f64> = (1..p.len() - 1)
        .map(|i| p[i - 1][1] - 2.0 * p[i][1] + p[i + 1][1])
        .collect();
    if d.iter().all(|&v| v > tol) {
        return Convexity::StrictlyConvex;
    }
    if d.iter().all(|&v| v < -tol) {
        return Convexity::StrictlyConcave;
    }
    let mut best = 0;
    for (k, v) in d.iter().enumerate() {
        if v.abs() < d[best].abs() {
            best = k;
        }
    }
    let i = best + 1;
    let not_convex = d.iter().position(|&v| v <= tol).unwrap_or(best) + 1;
    let not_concave = d.iter().position(|&v| v >= -tol).unwrap_or(best) + 1;
    Convexity::Neither {
        witness: [p[i - 1][0], p[i][0], p[i + 1][0]],
        second_difference: d[best],
        not_convex_at: p[not_convex][0],
        not_concave_at: p[not_concave][0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub x: f64,
    pub y: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub points: Vec<BoundaryPoint>,
    pub hull_tolerance: f64,
}

impl BoundaryReport {
    pub fn boundary_xs(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.boundary).map(|p| p.x).collect()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.boundary).collect()
    }
}

/// Flags grid points whose graph point is extreme in the convex hull of the
/// sampled graph: a hull vertex of the graph or of its reflection
/// `(x, -f(x))`. The endpoints are always flagged.
pub fn choquet_boundary(fs: &FunctionSystem) -> Result<BoundaryReport, FunctionSystemError> {
    let s = fs.sample()?;
    Ok(boundary_of_sample(&s, hull_tolerance(&s)))
}

pub fn boundary_of_sample(s: &GraphSample, tol: f64) -> BoundaryReport {
    let n = s.points.len();
    let mut flags = vec![false; n];
    for i in convex_hull(&s.points, tol) {
        flags[i] = true;
    }
    let reflected: Vec<[f64; 2]> = s.points.iter().map(|p| [p[0], -p[1]]).collect();
    for i in convex_hull(&reflected, tol) {
        flags[i] = true;
    }
    if n > 0 {
        flags[0] = true;
        flags[n - 1] = true;
    }
    BoundaryReport {
        points: s
            .points
            .iter()
            .zip(flags)
            .map(|(p, boundary)| BoundaryPoint {
                x: p[0],
                y: p[1],
                boundary,
            })
            .collect(),
        hull_tolerance: tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    fn fs(f: &str, a: f64, b: f64, m: usize) -> FunctionSystem {
        FunctionSystem::new(a, b, parse(f).unwrap(), m).unwrap()
    }

    #[test]
    fn triangle_hull() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(convex_hull(&pts, 1e-9), vec![0, 1, 2]);
    }

    #[test]
    fn collinear_midpoint_is_excluded() {
        let pts = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]];
        assert_eq!(convex_hull(&pts, 1e-9), vec![0, 2]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(convex_hull(&[[1.0, 2.0]], 1e-9), vec![0]);
        assert_eq!(convex_hull(&[[1.0, 2.0], [1.0, 2.0]], 1e-9), vec![0]);
        assert_eq!(convex_hull(&[[1.0, 2.0], [0.0, 2.0]], 1e-9), vec![1, 0]);
    }

    // Oracle: every interior second difference of a convex sample is positive,
    // so every sample point should be a hull vertex.
    #[test]
    fn sampled_parabola_is_all_vertices() {
        let s = fs("x^2", 0.0, 1.0, 101).sample().unwrap();
        let ys = s.ys();
        assert!((1..100).all(|i| ys[i - 1] - 2.0 * ys[i] + ys[i + 1] > 0.0));
        let hull = convex_hull(&s.points, hull_tolerance(&s));
        assert_eq!(hull.len(), 101);
        assert_eq!(hull[0], 0);
    }

    #[test]
    fn grid_is_exact_at_the_ends() {
        let g = fs("x", -1.0, 1.0, 7).grid();
        assert_eq!(g.first(), Some(&-1.0));
        assert_eq!(g.last(), Some(&1.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn convexity_examples() {
        let tol = 1e-10;
        assert_eq!(
            classify_convexity(&fs("x^2", 0.0, 1.0, 101), tol).unwrap(),
            Convexity::StrictlyConvex
        );
        assert!(matches!(
            classify_convexity(&fs("2*x+1", 0.0, 1.0, 101), tol).unwrap(),
            Convexity::Neither { .. }
        ));
        match classify_convexity(&fs("x^3", -1.0, 1.0, 101), tol).unwrap() {
            Convexity::Neither { witness, .. } => assert!(witness[0] < 0.0 && witness[2] > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn domain_errors_surface() {
        let bad = fs("sqrt(x)", -1.0, 1.0, 11);
        assert!(matches!(
            classify_convexity(&bad, 1e-10),
            Err(FunctionSystemError::Expr(_))
        ));
        assert!(FunctionSystem::new(1.0, 0.0, Expr::Var, 10).is_err());
        assert!(FunctionSystem::new(0.0, 1.0, Expr::Var, 2).is_err());
    }

    #[test]
    fn boundary_examples() {
        let convex = choquet_boundary(&fs("x^2", 0.0, 1.0, 101)).unwrap();
        assert!(convex.points.iter().all(|p| p.boundary));

        let kink = choquet_boundary(&fs("abs(x-1/2)", 0.0, 1.0, 101)).unwrap();
        assert_eq!(kink.boundary_xs(), vec![0.0, 0.5, 1.0]);

        let triple = choquet_boundary(&fs("x^3 - x", -1.0, 2.0, 3)).unwrap();
        assert!(triple.points.iter().all(|p| p.boundary));
    }

    #[test]
    fn boundary_is_invariant_under_adding_affine_functions() {
        for f in ["abs(x-1/2)", "x^3", "sin(6*x)", "x^2"] {
            let base = choquet_boundary(&fs(f, 0.0, 1.0, 101)).unwrap();
            let shifted = choquet_boundary(&fs(&format!("{f} + 3*x - 2"), 0.0, 1.0, 101)).unwrap();
            assert_eq!(base.flags(), shifted.flags(), "{f}");
        }
    }

    #[test]
    fn boundary_flags_stabilize_under_refinement() {
        for f in ["abs(x-1/2)", "x^2", "exp(x)"] {
            assert!(fs(f, 0.0, 1.0, 51).refinement_is_stable().unwrap(), "{f}");
        }
    }

    fn convex_poly() -> impl Strategy<Value = String> {
        // f'' = 2 c2 + 6 c3 x + 12 c4 x^2 >= 2 c2 - 6 |c3| > 0 on [0, 1]
        (-2.0f64..2.0, 0.5f64..3.0, -0.1f64..0.1, 0.0f64..1.0)
            .prop_map(|(c1, c2, c3, c4)| format!("{c1}*x + {c2}*x^2 + {c3}*x^3 + {c4}*x^4"))
    }

    fn point_in_polygon(poly: &[[f64; 2]], q: [f64; 2], tol: f64) -> bool {
        (0..poly.len()).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            cross(a, b, q) >= -tol * dist(a, b).max(1.0)
        })
    }

    proptest! {
        #[test]
        fn negation_swaps_convex_and_concave(src in convex_poly()) {
            let f = fs(&src, 0.0, 1.0, 101);
            let g = fs(&format!("-({src})"), 0.0, 1.0, 101);
            let cf = classify_convexity(&f, 1e-10).unwrap();
            let cg = classify_convexity(&g, 1e-10).unwrap();
            prop_assert_eq!(cf, Convexity::StrictlyConvex);
            prop_assert_eq!(cg, Convexity::StrictlyConcave);
        }

        #[test]
        fn convex_implies_full_boundary(src in convex_poly()) {
            let f = fs(&src, 0.0, 1.0, 101);
            let b = choquet_boundary(&f).unwrap();
            prop_assert!(b.points.iter().all(|p| p.boundary));
        }

        #[test]
        fn hull_is_convex_and_contains_all_points(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..60)
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let hull = convex_hull(&pts, 1e-9);
            let poly: Vec<[f64; 2]> = hull.iter().map(|&i| pts[i]).collect();
            if poly.len() >= 3 {
                for k in 0..poly.len() {
                    let (a, b, c) = (poly[k], poly[(k + 1) % poly.len()], poly[(k + 2) % poly.len()]);
                    prop_assert!(cross(a, b, c) > 0.0);
                }
                for &q in &pts {
                    prop_assert!(point_in_polygon(&poly, q, 1e-9));
                }
            }
            let start = poly[0];
            prop_assert!(pts.iter().all(|p| (p[0], p[1]) >= (start[0], start[1])));
        }
    }
}
