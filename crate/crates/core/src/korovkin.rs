//! Korovkin-type convergence tables: Bernstein operators on `C[0,1]` and
//! block pinchings on `M_d`.
//!
//! A table lists, for each member of a family of unital positive maps, the
//! sup-norm (operator norm for matrices) error on the test functions
//! `1, x, x²` and on probe functions.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::choi::{choi_of_block_pinching, choi_of_conjugation, ChoiError, ChoiMatrix};
use crate::expr::{parse, Expr, ExprError};
use crate::linalg::{eig_hermitian, operator_norm, ComplexMatrix, LinalgError, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KorovkinError {
    #[error("Bernstein degree must be at least 1")]
    ZeroDegree,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("function value at x = {x} is not finite")]
    NonFinite { x: f64 },
    #[error("block counts must be strictly increasing and lie in 1..={d}, got {blocks:?}")]
    BadBlocks { d: usize, blocks: Vec<usize> },
    #[error("parameter list is empty")]
    EmptyList,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Choi(#[from] ChoiError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Probe battery used when none is given.
pub const DEFAULT_PROBES: [&str; 4] = ["sin(pi*x)", "abs(2*x-1)", "x^3", "exp(x)"];

/// The Korovkin test functions `1, x, x²`.
pub const TEST_FUNCTIONS: [&str; 3] = ["1", "x", "x^2"];

/// Errors at or below this are treated as equal when checking monotonicity.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Degrees above this use log-space binomial weights.
pub const LOG_SPACE_DEGREE: usize = 500;

/// A function together with the text it was parsed from, used as its label.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFunction {
    pub label: String,
    pub expr: Expr,
}

impl NamedFunction {
    pub fn parse(text: &str) -> Result<Self, KorovkinError> {
        Ok(Self {
            label: text.trim().to_string(),
            expr: parse(text)?,
        })
    }
}

pub fn default_probes() -> Vec<NamedFunction> {
    DEFAULT_PROBES
        .iter()
        .map(|s| NamedFunction::parse(s).expect("built-in probe parses"))
        .collect()
}

pub fn test_functions() -> Vec<NamedFunction> {
    TEST_FUNCTIONS
        .iter()
        .map(|s| NamedFunction::parse(s).expect("built-in test parses"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn sup_distance(&self, other: &SampledFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `m` equally spaced points on `[0, 1]` with exact endpoints.
pub fn unit_grid(m: usize) -> Result<Vec<f64>, KorovkinError> {
    if m < 2 {
        return Err(KorovkinError::GridTooSmall(m));
    }
    let h = (m - 1) as f64;
    Ok((0..m).map(|i| i as f64 / h).collect())
}

pub fn sample(f: &Expr, grid: &[f64]) -> Result<SampledFunction, KorovkinError> {
    let values = grid.iter().map(|&x| f.eval(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(SampledFunction {
        grid: grid.to_vec(),
        values,
    })
}

/// Bernstein basis values `C(n,k) x^k (1-x)^(n-k)`, `k = 0..=n`.
///
/// Up to `LOG_SPACE_DEGREE` the weights come from the ratio recurrence,
/// run upward from `(1-x)^n` when `x ≤ 1/2` and downward from `x^n`
/// otherwise so the seed never underflows. Above it they are exponentiated
/// from accumulated log-binomials.
pub fn bernstein_weights(n: usize, x: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if x <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    if x >= 1.0 {
        w[n] = 1.0;
        return w;
    }
    if n > LOG_SPACE_DEGREE {
        // log w_k by accumulating log-ratios, shifted by the maximum and
        // renormalized so the weights sum to one.
        let log_odds = x.ln() - (-x).ln_1p();
        let mut log_w = Vec::with_capacity(n + 1);
        let mut acc = n as f64 * (-x).ln_1p();
        log_w.push(acc);
        for k in 1..=n {
            acc += ((n - k + 1) as f64 / k as f64).ln() + log_odds;
            log_w.push(acc);
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (wk, l) in w.iter_mut().zip(&log_w) {
            *wk = (l - top).exp();
        }
        let total: f64 = w.iter().sum();
        for wk in &mut w {
            *wk /= total;
        }
        return w;
    }
    let ratio = x / (1.0 - x);
    if x <= 0.5 {
        w[0] = (1.0 - x).powi(n as i32);
        for k in 0..n {
            w[k + 1] = w[k] * ((n - k) as f64 / (k + 1) as f64) * ratio;
        }
    } else {
        w[n] = x.powi(n as i32);
        for k in (0..n).rev() {
            w[k] = w[k + 1] * ((k + 1) as f64 / (n - k) as f64) / ratio;
        }
    }
    w
}

/// `(B_n f)` on `m` grid points of `[0, 1]`.
pub fn bernstein(n: usize, f: &Expr, m: usize) -> Result<SampledFunction, KorovkinError> {
    if n == 0 {
        return Err(KorovkinError::ZeroDegree);
    }
    let grid = unit_grid(m)?;
    let nodes = node_values(n, f)?;
    let values = grid
        .iter()
        .map(|&x| apply_weights(&bernstein_weights(n, x), &nodes))
        .collect();
    Ok(SampledFunction { grid, values })
}

fn node_values(n: usize, f: &Expr) -> Result<Vec<f64>, KorovkinError> {
    (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            let y = f.eval(x)?;
            if y.is_finite() {
                Ok(y)
            } else {
                Err(KorovkinError::NonFinite { x })
            }
        })
        .collect()
}

fn apply_weights(w: &[f64], nodes: &[f64]) -> f64 {
    w.iter().zip(nodes).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Test,
    Probe,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorColumn {
    pub label: String,
    pub role: Role,
    pub errors: Vec<f64>,
    /// Row indices where the error went up by more than `NOISE_FLOOR`.
    pub increases: Vec<usize>,
}

impl ErrorColumn {
    fn new(label: String, role: Role, errors: Vec<f64>) -> Self {
        let increases = (1..errors.len())
            .filter(|&i| errors[i] > errors[i - 1] + NOISE_FLOOR)
            .collect();
        Self {
            label,
            role,
            errors,
            increases,
        }
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KorovkinTable {
    pub family: String,
    /// Name of the family parameter (`n` or `blocks`).
    pub parameter: String,
    pub values: Vec<usize>,
    pub columns: Vec<ErrorColumn>,
}

impl KorovkinTable {
    pub fn column(&self, label: &str) -> Option<&ErrorColumn> {
        self.columns.iter().find(|c| c.label == label)
    }

    fn max_test_error(&self, row: usize) -> f64 {
        self.columns
            .iter()
            .filter(|c| c.role == Role::Test)
            .fold(0.0_f64, |m, c| m.max(c.errors[row]))
    }

    /// Whenever the largest test error drops from one row to the next, no
    /// probe error goes up (beyond `NOISE_FLOOR`).
    pub fn probes_follow_tests(&self) -> bool {
        (1..self.values.len()).all(|r| {
            self.max_test_error(r) >= self.max_test_error(r - 1)
                || self
                    .columns
                    .iter()
                    .filter(|c| c.role == Role::Probe)
                    .all(|c| c.errors[r] <= c.errors[r - 1] + NOISE_FLOOR)
        })
    }

    /// Aligned-column text rendering of the table.
    pub fn render(&self) -> String {
        let mut headers = vec![self.parameter.clone()];
        headers.extend(self.columns.iter().map(|c| c.label.clone()));
        let rows: Vec<Vec<String>> = self
            .values
            .iter()
            .enumerate()
            .map(|(r, v)| {
                let mut row = vec![v.to_string()];
                row.extend(self.columns.iter().map(|c| format!("{:.3e}", c.errors[r])));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|i| {
                rows.iter()
                    .map(|r| r[i].len())
                    .chain([headers[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.family);
        for line in std::iter::once(&headers).chain(&rows) {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

/// Which family a table is built for.
#[derive(Debug, Clone, PartialEq)]
pub enum MapFamily {
    /// Bernstein operators, errors measured on an `m`-point grid.
    Bernstein { grid: usize },
    /// Block pinchings on `M_d` acting on `X = diag(grid of [0,1])`.
    MatrixPinching { d: usize, regime: PinchRegime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "regime")]
pub enum PinchRegime {
    /// `φ_b = P_b`.
    Plain,
    /// `φ_b(Y) = P_b(U_b Y U_b†)` with `U_b = exp(iK/b)` for a seeded
    /// Hermitian `K` of unit norm.
    Conjugated { seed: u64 },
}

/// Error table for `family` along `params` (degrees or block counts).
pub fn korovkin_table(
    family: &MapFamily,
    tests: &[NamedFunction],
    probes: &[NamedFunction],
    params: &[usize],
) -> Result<KorovkinTable, KorovkinError> {
    if params.is_empty() {
        return Err(KorovkinError::EmptyList);
    }
    let labelled: Vec<(&Expr, Role)> = tests
        .iter()
        .map(|f| (&f.expr, Role::Test))
        .chain(probes.iter().map(|f| (&f.expr, Role::Probe)))
        .collect();
    let mut errors = vec![Vec::with_capacity(params.len()); labelled.len()];
    let (name, parameter) = match family {
        MapFamily::Bernstein { grid } => {
            let xs = unit_grid(*grid)?;
            let exact: Vec<SampledFunction> = labelled.iter().map(|(f, _)| sample(f, &xs)).collect::<Result<_, _>>()?;
            for &n in params {
                if n == 0 {
                    return Err(KorovkinError::ZeroDegree);
                }
                let nodes: Vec<Vec<f64>> = labelled
                    .iter()
                    .map(|(f, _)| node_values(n, f))
                    .collect::<Result<_, _>>()?;
                let mut worst = vec![0.0_f64; labelled.len()];
                for (gi, &x) in xs.iter().enumerate() {
                    let w = bernstein_weights(n, x);
                    for (c, node) in nodes.iter().enumerate() {
                        let e = (apply_weights(&w, node) - exact[c].values[gi]).abs();
                        worst[c] = worst[c].max(e);
                    }
                }
                for (c, e) in worst.into_iter().enumerate() {
                    errors[c].push(e);
                }
            }
            ("bernstein".to_string(), "n")
        }
        MapFamily::MatrixPinching { d, regime } => {
            check_blocks(*d, params)?;
            let grid = unit_grid(*d)?;
            let targets: Vec<ComplexMatrix> = labelled
                .iter()
                .map(|(f, _)| diagonal_function(f, &grid))
                .collect::<Result<_, _>>()?;
            let k = match regime {
                PinchRegime::Plain => None,
                PinchRegime::Conjugated { seed } => Some(unit_hermitian(*d, *seed)),
            };
            for &b in params {
                let map = PinchingMap::new(*d, b, k.as_ref().map(|k| (k, b)))?;
                for (c, t) in targets.iter().enumerate() {
                    errors[c].push(operator_norm(&(&map.apply(t) - t)));
                }
            }
            let name = match regime {
                PinchRegime::Plain => format!("block pinching, d = {d}"),
                PinchRegime::Conjugated { seed } => {
                    format!("block pinching after exp(iK/b) conjugation, d = {d}, seed = {seed}")
                }
            };
            (name, "blocks")
        }
    };
    let columns = tests
        .iter()
        .chain(probes)
        .zip(labelled.iter().zip(errors))
        .map(|(f, ((_, role), e))| ErrorColumn::new(f.label.clone(), *role, e))
        .collect();
    Ok(KorovkinTable {
        family: name,
        parameter: parameter.to_string(),
        values: params.to_vec(),
        columns,
    })
}

fn check_blocks(d: usize, blocks: &[usize]) -> Result<(), KorovkinError> {
    let ok = blocks.iter().all(|&b| b >= 1 && b <= d) && blocks.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(KorovkinError::BadBlocks {
            d,
            blocks: blocks.to_vec(),
        })
    }
}

fn diagonal_function(f: &Expr, grid: &[f64]) -> Result<ComplexMatrix, KorovkinError> {
    let vals = grid
        .iter()
        .map(|&x| {
            let y = f.eval(x)?;
            if y.is_finite() {
                Ok(y)
            } else {
                Err(KorovkinError::NonFinite { x })
            }
        })
        .collect::<Result<Vec<_>, KorovkinError>>()?;
    Ok(ComplexMatrix::from_real_diag(&vals))
}

/// Seeded Hermitian matrix of operator norm 1.
fn unit_hermitian(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let h = g.hermitian_part().into_matrix();
    let norm = operator_norm(&h);
    if norm > 0.0 {
        h.scale_real(1.0 / norm)
    } else {
        h
    }
}

/// Sizes of `b` contiguous blocks covering `d`, the first `d mod b` one larger.
pub fn block_sizes(d: usize, b: usize) -> Vec<usize> {
    (0..b).map(|i| d / b + usize::from(i < d % b)).collect()
}

/// `Y ↦ P_b(U Y U†)`: pinching onto `b` contiguous blocks, optionally after
/// conjugating by `U = exp(iK/s)`.
#[derive(Debug, Clone)]
pub struct PinchingMap {
    sizes: Vec<usize>,
    label: Vec<usize>,
    unitary: Option<ComplexMatrix>,
}

impl PinchingMap {
    /// `conjugation = Some((K, s))` conjugates by `exp(iK/s)` first.
    pub fn new(d: usize, b: usize, conjugation: Option<(&ComplexMatrix, usize)>) -> Result<Self, KorovkinError> {
        check_blocks(d, &[b])?;
        let sizes = block_sizes(d, b);
        let label = sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s))
            .collect();
        let unitary = match conjugation {
            None => None,
            Some((k, s)) => {
                let eig = eig_hermitian(&k.hermitian_part())?;
                let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, l / s as f64)).collect();
                let v = &eig.vectors;
                let vd = ComplexMatrix::from_fn(d, d, |i, j| v[(i, j)] * phases[j]);
                Some(vd.matmul(&v.adjoint()))
            }
        };
        Ok(Self { sizes, label, unitary })
    }

    pub fn unitary(&self) -> Option<&ComplexMatrix> {
        self.unitary.as_ref()
    }

    pub fn apply(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let z = match &self.unitary {
            Some(u) => u.matmul(y).matmul(&u.adjoint()),
            None => y.clone(),
        };
        let n = z.rows();
        ComplexMatrix::from_fn(n, n, |i, j| {
            if self.label[i] == self.label[j] {
                z[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// The same map as a Choi matrix (size `d² × d²`; meant for small `d`).
    pub fn choi(&self) -> Result<ChoiMatrix, KorovkinError> {
        let p = choi_of_block_pinching(&self.sizes)?;
        Ok(match &self.unitary {
            Some(u) => p.compose(&choi_of_conjugation(u)?)?,
            None => p,
        })
    }
}

/// Both regimes of the pinching demo on `X = diag(grid)`.
#[derive(Debug, Clone, Serialize)]
pub struct PinchingReport {
    pub d: usize,
    pub seed: u64,
    pub plain: KorovkinTable,
    pub conjugated: KorovkinTable,
}

/// Errors on `1, X, X²` and `probe(X)` for both pinching regimes.
pub fn matrix_pinching_family(
    d: usize,
    blocks: &[usize],
    probe: &NamedFunction,
    seed: u64,
) -> Result<PinchingReport, KorovkinError> {
    let tests = test_functions();
    let probes = std::slice::from_ref(probe);
    let plain = korovkin_table(
        &MapFamily::MatrixPinching {
            d,
            regime: PinchRegime::Plain,
        },
        &tests,
        probes,
        blocks,
    )?;
    let conjugated = korovkin_table(
        &MapFamily::MatrixPinching {
            d,
            regime: PinchRegime::Conjugated { seed },
        },
        &tests,
        probes,
        blocks,
    )?;
    Ok(PinchingReport {
        d,
        seed,
        plain,
        conjugated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn named(s: &str) -> NamedFunction {
        NamedFunction::parse(s).unwrap()
    }

    #[test]
    fn reproduces_affine_functions() {
        for n in [1, 7, 10, 100, 600, 1000] {
            for f in ["1", "x", "3-2*x"] {
                let b = bernstein(n, &e(f), 101).unwrap();
                let exact = sample(&e(f), &b.grid).unwrap();
                assert!(b.sup_distance(&exact) <= 1e-12, "n={n} f={f}");
            }
        }
    }

    #[test]
    fn square_error_is_quarter_over_n() {
        for n in [10, 100, 1000] {
            let b = bernstein(n, &e("x^2"), 1001).unwrap();
            let exact = sample(&e("x^2"), &b.grid).unwrap();
            // B_n(x²) - x² = x(1-x)/n, checked pointwise as well.
            for (i, &x) in b.grid.iter().enumerate() {
                assert!((b.values[i] - exact.values[i] - x * (1.0 - x) / n as f64).abs() < 1e-13);
            }
            assert!((b.sup_distance(&exact) - 0.25 / n as f64).abs() <= 1e-10);
        }
    }

    #[test]
    fn weights_agree_across_the_log_space_switch() {
        // Recurrence weights at degree 500 are checked by their moments, the
        // log-space ones at degree 501 against expanding (0.7 + 0.3)^501.
        let n = LOG_SPACE_DEGREE;
        for x in [0.0, 0.013, 0.5, 0.77, 1.0] {
            let w = bernstein_weights(n, x);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let mean: f64 = w.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
            assert!((mean - n as f64 * x).abs() < 1e-9);
        }
        let w_log = bernstein_weights(n + 1, 0.3);
        let mut casteljau = vec![0.0; n + 2];
        casteljau[0] = 1.0;
        for _ in 0..=n {
            for k in (1..casteljau.len()).rev() {
                casteljau[k] = casteljau[k] * 0.7 + casteljau[k - 1] * 0.3;
            }
            casteljau[0] *= 0.7;
        }
        for (a, b) in w_log.iter().zip(&casteljau) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn bernstein_table_columns() {
        let probe = named("sin(pi*x)");
        let table = korovkin_table(
            &MapFamily::Bernstein { grid: 1001 },
            &test_functions(),
            &[probe.clone(), probe],
            &[10, 100, 1000],
        )
        .unwrap();
        let cols = &table.columns;
        assert_eq!(cols.len(), 5);
        assert!(cols[3].strictly_decreasing());
        assert_eq!(cols[3].errors, cols[4].errors);
        assert!(cols[0].errors.iter().all(|&v| v <= 1e-12));
        assert!(table.probes_follow_tests());

        let single = korovkin_table(&MapFamily::Bernstein { grid: 11 }, &test_functions(), &[], &[5]).unwrap();
        assert_eq!(single.values.len(), 1);
        assert!(single.render().lines().count() == 3);
    }

    #[test]
    fn plain_pinching_fixes_diagonal_x() {
        let report = matrix_pinching_family(16, &[1, 2, 4, 8, 16], &named("abs(2*x-1)"), 3).unwrap();
        for c in &report.plain.columns {
            assert!(c.errors.iter().all(|&v| v == 0.0), "{}", c.label);
        }
    }

    #[test]
    fn conjugated_pinching_converges() {
        let report = matrix_pinching_family(32, &[1, 2, 4, 8, 16, 32], &named("abs(2*x-1)"), 3).unwrap();
        let t = &report.conjugated;
        assert!(t.column("1").unwrap().errors.iter().all(|&v| v < 1e-12));
        assert!(t.column("x").unwrap().strictly_decreasing());
        assert!(t.column("x^2").unwrap().strictly_decreasing());
        assert!(t.column("abs(2*x-1)").unwrap().strictly_decreasing());
    }

    #[test]
    fn pinching_maps_are_ucp_and_match_their_choi() {
        let k = unit_hermitian(6, 9);
        let map = PinchingMap::new(6, 3, Some((&k, 2))).unwrap();
        let choi = map.choi().unwrap();
        assert!(choi.is_ucp().is_ucp);
        let y = ComplexMatrix::from_fn(6, 6, |i, j| C64::new((i * 6 + j) as f64, i as f64 - j as f64));
        let direct = map.apply(&y);
        let via = choi.apply(&y).unwrap();
        assert!(operator_norm(&(&direct - &via)) < 1e-10);
        // Conjugated outputs need not commute with X.
        let x = ComplexMatrix::from_real_diag(&unit_grid(6).unwrap());
        let fx = map.apply(&x);
        let comm = &fx.matmul(&x) - &x.matmul(&fx);
        assert!(operator_norm(&comm) > 1e-6);
    }

    #[test]
    fn rejects_bad_blocks() {
        let p = named("x");
        assert!(matches!(
            matrix_pinching_family(8, &[2, 2], &p, 0),
            Err(KorovkinError::BadBlocks { .. })
        ));
        assert!(matches!(
            matrix_pinching_family(8, &[9], &p, 0),
            Err(KorovkinError::BadBlocks { .. })
        ));
        assert_eq!(bernstein(0, &p.expr, 5), Err(KorovkinError::ZeroDegree));
        assert_eq!(block_sizes(10, 4), vec![3, 3, 2, 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bernstein_preserves_positivity(n in 1usize..800, a in 0.0f64..1.0, c in 0.0f64..2.0) {
            // (x - a)² + c ≥ 0 and |sin(7x)| ≥ 0
            let f = e(&format!("(x-{a})^2+{c}"));
            let g = e("abs(sin(7*x))");
            for h in [f, g] {
                let b = bernstein(n, &h, 41).unwrap();
                prop_assert!(b.values.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn pinchings_preserve_psd(seed in 0u64..1000, b in 1usize..6) {
            let k = unit_hermitian(5, seed);
            let map = PinchingMap::new(5, b, Some((&k, 1))).unwrap();
            let g = unit_hermitian(5, seed + 1);
            let psd = g.matmul(&g);
            let out = map.apply(&psd).hermitian_part();
            prop_assert!(crate::linalg::min_eigenvalue(&out).unwrap() >= -1e-12);
            let one = map.apply(&ComplexMatrix::identity(5));
            prop_assert!(operator_norm(&(&one - &ComplexMatrix::identity(5))) < 1e-13);
        }
    }
}
