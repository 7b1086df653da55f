//! Dense linear programming and the finite-point minimax identities.
//!
//! For a function system `S = span{1, b_1, ...}` on a finite set `X` and a
//! state `φ` of `S`,
//!
//! ```text
//! sup{φ(s) : s ∈ S, s ≤ x} = min{ρ(x) : ρ a probability on X extending φ}
//! inf{φ(s) : s ∈ S, s ≥ x} = max{ρ(x) : ρ a probability on X extending φ}
//! ```
//!
//! and both sides are small linear programs.

use serde::Serialize;
use thiserror::Error;

/// Reduced-cost and pivot threshold of the simplex method.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Phase-one infeasibility threshold, relative to `1 + max |b|`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense cᵀx` subject to the constraints, with `x_j ≥ 0` unless `free[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

impl LpProblem {
    /// All variables non-negative, no constraints yet.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn all_free(mut self) -> Self {
        self.free.iter_mut().for_each(|f| *f = true);
        self
    }

    pub fn subject_to(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of `simplex_solve`. The duals are signed so that at optimality
/// `value = Σ duals_i · rhs_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub pivots: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub complementary_slackness: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("constraint {index} has {found} coefficients, expected {expected}")]
    Shape {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("problem data must be finite")]
    NonFinite,
    #[error("pivot limit {0} reached")]
    PivotLimit(usize),
}

struct Tableau {
    /// `m × (cols + 1)`, last column the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Minimizes `cost` over the current basis with Bland's rule. Returns
    /// `false` on unboundedness.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], limit: usize) -> Result<bool, LpError> {
        loop {
            if self.pivots >= limit {
                return Err(LpError::PivotLimit(limit));
            }
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.t[i][j])
                        .sum::<f64>();
                reduced < -SIMPLEX_TOL
            });
            let Some(j) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][j];
                if a > SIMPLEX_TOL {
                    let ratio = self.t[i][self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 * (1.0 + lr.abs())
                                || (ratio <= lr + 1e-12 * (1.0 + lr.abs()) && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((i, _)) => self.pivot(i, j),
                None => return Ok(false),
            }
        }
    }
}

/// Dense two-phase simplex with Bland's anti-cycling rule.
pub fn simplex_solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    let n = p.num_vars();
    for (index, c) in p.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::Shape {
                index,
                found: c.coeffs.len(),
                expected: n,
            });
        }
    }
    let finite = p.objective.iter().all(|v| v.is_finite())
        && p.constraints
            .iter()
            .all(|c| c.rhs.is_finite() && c.coeffs.iter().all(|v| v.is_finite()));
    if !finite || p.free.len() != n {
        return Err(LpError::NonFinite);
    }
    let m = p.constraints.len();
    let min_sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };

    // Column layout: original variables (free ones split in two), then one
    // slack per inequality, then one artificial per row.
    let mut var_cols = Vec::with_capacity(n);
    let mut cols = 0;
    for &f in &p.free {
        var_cols.push((cols, f.then_some(cols + 1)));
        cols += if f { 2 } else { 1 };
    }
    let mut slack_col = vec![None; m];
    for (i, c) in p.constraints.iter().enumerate() {
        if c.relation != Relation::Eq {
            slack_col[i] = Some(cols);
            cols += 1;
        }
    }
    let first_artificial = cols;
    cols += m;

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut row_sign = vec![1.0; m];
    let mut basis = vec![0; m];
    for (i, c) in p.constraints.iter().enumerate() {
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        row_sign[i] = sign;
        for (j, &a) in c.coeffs.iter().enumerate() {
            let (pos, neg) = var_cols[j];
            t[i][pos] = sign * a;
            if let Some(q) = neg {
                t[i][q] = -sign * a;
            }
        }
        if let Some(s) = slack_col[i] {
            t[i][s] = sign * if c.relation == Relation::Le { 1.0 } else { -1.0 };
        }
        t[i][first_artificial + i] = 1.0;
        t[i][cols] = sign * c.rhs;
        basis[i] = match slack_col[i] {
            Some(s) if t[i][s] > 0.0 => s,
            _ => first_artificial + i,
        };
    }
    let mut std_cost = vec![0.0; cols];
    for (j, &(pos, neg)) in var_cols.iter().enumerate() {
        std_cost[pos] = min_sign * p.objective[j];
        if let Some(q) = neg {
            std_cost[q] = -min_sign * p.objective[j];
        }
    }
    let original = t.clone();
    let mut tab = Tableau {
        t,
        basis,
        cols,
        pivots: 0,
    };
    let limit = 50 * (m + cols) + 1000;

    let infeasible = |pivots| LpSolution {
        status: LpStatus::Infeasible,
        value: f64::NAN,
        x: vec![],
        duals: vec![],
        pivots,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        duality_gap: f64::NAN,
        complementary_slackness: f64::NAN,
    };

    // Phase one: minimize the artificials.
    let mut phase1 = vec![0.0; cols];
    phase1[first_artificial..].iter_mut().for_each(|c| *c = 1.0);
    let all = vec![true; cols];
    tab.optimize(&phase1, &all, limit)?;
    let b_scale = 1.0 + p.constraints.iter().fold(0.0_f64, |a, c| a.max(c.rhs.abs()));
    let artificial_sum: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= first_artificial)
        .map(|i| tab.t[i][cols])
        .sum();
    if artificial_sum > FEASIBILITY_TOL * b_scale {
        return Ok(infeasible(tab.pivots));
    }
    // Drive remaining artificials out; rows where that is impossible are
    // redundant.
    let mut redundant = vec![false; m];
    for i in 0..m {
        if tab.basis[i] >= first_artificial {
            match (0..first_artificial).find(|&j| tab.t[i][j].abs() > 1e-9) {
                Some(j) => tab.pivot(i, j),
                None => redundant[i] = true,
            }
        }
    }
    let keep: Vec<usize> = (0..m).filter(|&i| !redundant[i]).collect();
    tab.t = keep.iter().map(|&i| tab.t[i].clone()).collect();
    tab.basis = keep.iter().map(|&i| tab.basis[i]).collect();

    // Phase two.
    let mut allowed = vec![true; cols];
    allowed[first_artificial..].iter_mut().for_each(|a| *a = false);
    if !tab.optimize(&std_cost, &allowed, limit)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: if p.sense == Sense::Maximize {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            ..infeasible(tab.pivots)
        });
    }

    let mut z = vec![0.0; cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        z[b] = tab.t[i][cols];
    }
    let x: Vec<f64> = var_cols
        .iter()
        .map(|&(pos, neg)| z[pos] - neg.map_or(0.0, |q| z[q]))
        .collect();

    // Duals of the kept standard-form rows: B^T y = c_B.
    let k = keep.len();
    let mut bt = vec![vec![0.0; k + 1]; k];
    for (r, &b) in tab.basis.iter().enumerate() {
        for (c, &i) in keep.iter().enumerate() {
            bt[r][c] = original[i][b];
        }
        bt[r][k] = std_cost[b];
    }
    let y_kept = solve_dense(bt).unwrap_or_else(|| vec![0.0; k]);
    let mut duals = vec![0.0; m];
    for (c, &i) in keep.iter().enumerate() {
        duals[i] = min_sign * row_sign[i] * y_kept[c];
    }
    let value: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let mut sol = LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        duals,
        pivots: tab.pivots,
        primal_residual: 0.0,
        dual_residual: 0.0,
        duality_gap: 0.0,
        complementary_slackness: 0.0,
    };
    certify(p, &mut sol);
    Ok(sol)
}

/// Fills in the feasibility, duality and complementary-slackness residuals
/// of an optimal solution from the problem data alone.
fn certify(p: &LpProblem, sol: &mut LpSolution) {
    let s = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut primal: f64 = 0.0;
    let mut slackness: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for (j, &v) in sol.x.iter().enumerate() {
        if !p.free[j] {
            primal = primal.max(-v);
        }
    }
    for (c, &y) in p.constraints.iter().zip(&sol.duals) {
        let ax: f64 = c.coeffs.iter().zip(&sol.x).map(|(a, v)| a * v).sum();
        let r = ax - c.rhs;
        primal = primal.max(match c.relation {
            Relation::Le => r,
            Relation::Ge => -r,
            Relation::Eq => r.abs(),
        });
        // Minimization form: y ≤ 0 on ≤ rows, y ≥ 0 on ≥ rows.
        let ym = s * y;
        dual = dual.max(match c.relation {
            Relation::Le => ym,
            Relation::Ge => -ym,
            Relation::Eq => 0.0,
        });
        slackness = slackness.max((y * r).abs());
    }
    for j in 0..p.num_vars() {
        let aty: f64 = p
            .constraints
            .iter()
            .zip(&sol.duals)
            .map(|(c, y)| c.coeffs[j] * s * y)
            .sum();
        let reduced = s * p.objective[j] - aty;
        dual = dual.max(if p.free[j] { reduced.abs() } else { -reduced });
        slackness = slackness.max((reduced * sol.x[j]).abs());
    }
    let by: f64 = p.constraints.iter().zip(&sol.duals).map(|(c, y)| c.rhs * y).sum();
    sol.primal_residual = primal.max(0.0);
    sol.dual_residual = dual.max(0.0);
    sol.duality_gap = (sol.value - by).abs();
    sol.complementary_slackness = slackness;
}

/// Gaussian elimination with partial pivoting on an augmented `k × (k+1)`
/// system.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        for r in (col + 1)..k {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut y = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = ((r + 1)..k).map(|c| a[r][c] * y[c]).sum();
        y[r] = (a[r][k] - s) / a[r][r];
    }
    Some(y)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinimaxError {
    #[error("invalid function system: {0}")]
    BadSystem(String),
    #[error("expected {expected} values, got {found}")]
    Length { expected: usize, found: usize },
    #[error("the functional is not a state of the system on these points")]
    NotAState,
    #[error("{0} is unbounded")]
    Unbounded(&'static str),
    #[error("point index {index} out of range for {len} points")]
    BadPoint { index: usize, len: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A function system restricted to finitely many points: row `i` of `basis`
/// holds the values of the `i`-th basis function, row 0 being the unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteFunctionSystem {
    points: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl FiniteFunctionSystem {
    pub fn new(points: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self, MinimaxError> {
        if points.is_empty() {
            return Err(MinimaxError::BadSystem("no points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(MinimaxError::BadSystem("points must be finite".into()));
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(MinimaxError::BadSystem("points must be distinct".into()));
        }
        if basis.is_empty() || basis[0].iter().any(|&v| v != 1.0) {
            return Err(MinimaxError::BadSystem("first basis row must be the unit".into()));
        }
        for row in &basis {
            if row.len() != points.len() {
                return Err(MinimaxError::Length {
                    expected: points.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MinimaxError::BadSystem("basis values must be finite".into()));
            }
        }
        Ok(Self { points, basis })
    }

    /// `span{1, f_1, ..., f_k}` sampled at `points`.
    pub fn from_functions(points: Vec<f64>, fs: &[&dyn Fn(f64) -> f64]) -> Result<Self, MinimaxError> {
        let mut basis = vec![vec![1.0; points.len()]];
        for f in fs {
            basis.push(points.iter().map(|&x| f(x)).collect());
        }
        Self::new(points, basis)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The state `s ↦ s(x_j)`.
    pub fn evaluation(&self, j: usize) -> Vec<f64> {
        self.basis.iter().map(|row| row[j]).collect()
    }

    /// The state `s ↦ Σ_j w_j s(x_j)`.
    pub fn mixture(&self, weights: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| row.iter().zip(weights).map(|(a, w)| a * w).sum())
            .collect()
    }

    fn check_state(&self, phi: &[f64]) -> Result<(), MinimaxError> {
        if phi.len() != self.basis.len() {
            return Err(MinimaxError::Length {
                expected: self.basis.len(),
                found: phi.len(),
            });
        }
        Ok(())
    }

    fn check_values(&self, x: &[f64]) -> Result<(), MinimaxError> {
        if x.len() != self.points.len() {
            return Err(MinimaxError::Length {
                expected: self.points.len(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// `sup φ(s)` over `s ∈ S` with `s ≤ x`, or `inf φ(s)` over `s ≥ x`.
fn dominated_lp(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64], below: bool) -> Result<LpSolution, MinimaxError> {
    fs.check_state(phi)?;
    fs.check_values(x)?;
    let sense = if below { Sense::Maximize } else { Sense::Minimize };
    let relation = if below { Relation::Le } else { Relation::Ge };
    let mut lp = LpProblem::new(sense, phi.to_vec()).all_free();
    for (j, &xj) in x.iter().enumerate() {
        lp = lp.subject_to(fs.basis.iter().map(|row| row[j]).collect(), relation, xj);
    }
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Unbounded => Err(MinimaxError::Unbounded(if below {
            "sup over dominated elements"
        } else {
            "inf over dominating elements"
        })),
        // s = -c·1 (or +c·1) is always feasible.
        LpStatus::Infeasible => unreachable!("constant functions are always feasible"),
    }
}

/// `min ρ(x)` (or max) over probability measures on the points with
/// `ρ(b_i) = φ(b_i)` for every basis row.
fn extension_lp(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64], minimize: bool) -> Result<LpSolution, MinimaxError> {
    fs.check_state(phi)?;
    fs.check_values(x)?;
    let sense = if minimize { Sense::Minimize } else { Sense::Maximize };
    let mut lp = LpProblem::new(sense, x.to_vec());
    for (row, &target) in fs.basis.iter().zip(phi) {
        lp = lp.subject_to(row.clone(), Relation::Eq, target);
    }
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(MinimaxError::NotAState),
        LpStatus::Unbounded => unreachable!("probability measures form a compact set"),
    }
}

/// Returns an error unless `phi` has a representing probability measure.
pub fn check_state(fs: &FiniteFunctionSystem, phi: &[f64]) -> Result<(), MinimaxError> {
    extension_lp(fs, phi, &vec![0.0; fs.len()], true).map(|_| ())
}

pub fn sup_dominated(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64]) -> Result<f64, MinimaxError> {
    check_state(fs, phi)?;
    Ok(dominated_lp(fs, phi, x, true)?.value)
}

pub fn inf_dominating(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64]) -> Result<f64, MinimaxError> {
    check_state(fs, phi)?;
    Ok(dominated_lp(fs, phi, x, false)?.value)
}

pub fn min_extension(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64]) -> Result<f64, MinimaxError> {
    Ok(extension_lp(fs, phi, x, true)?.value)
}

pub fn max_extension(fs: &FiniteFunctionSystem, phi: &[f64], x: &[f64]) -> Result<f64, MinimaxError> {
    Ok(extension_lp(fs, phi, x, false)?.value)
}

/// Worst residuals over the LPs behind a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpDiagnostics {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub complementary_slackness: f64,
    pub pivots: usize,
}

impl LpDiagnostics {
    fn of(sols: &[&LpSolution]) -> Self {
        let worst = |f: fn(&LpSolution) -> f64| sols.iter().fold(0.0_f64, |m, s| m.max(f(s)));
        Self {
            primal_residual: worst(|s| s.primal_residual),
            dual_residual: worst(|s| s.dual_residual),
            duality_gap: worst(|s| s.duality_gap),
            complementary_slackness: worst(|s| s.complementary_slackness),
            pivots: sols.iter().map(|s| s.pivots).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub sup_dominated: f64,
    pub min_extension: f64,
    pub inf_dominating: f64,
    pub max_extension: f64,
    pub lower_gap: f64,
    pub upper_gap: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub lp: LpDiagnostics,
}

/// Both minimax equalities at tolerance `tol`.
pub fn verify_minimax(
    fs: &FiniteFunctionSystem,
    phi: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<MinimaxReport, MinimaxError> {
    let lo_ext = extension_lp(fs, phi, x, true)?;
    let hi_ext = extension_lp(fs, phi, x, false)?;
    let below = dominated_lp(fs, phi, x, true)?;
    let above = dominated_lp(fs, phi, x, false)?;
    let lower_gap = (below.value - lo_ext.value).abs();
    let upper_gap = (above.value - hi_ext.value).abs();
    Ok(MinimaxReport {
        sup_dominated: below.value,
        min_extension: lo_ext.value,
        inf_dominating: above.value,
        max_extension: hi_ext.value,
        lower_gap,
        upper_gap,
        tolerance: tol,
        holds: lower_gap <= tol && upper_gap <= tol,
        lp: LpDiagnostics::of(&[&lo_ext, &hi_ext, &below, &above]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub p_index: usize,
    pub point: f64,
    pub value: f64,
    /// `inf{s(p) : s ∈ S, s ≥ u}`.
    pub envelope: f64,
    pub gap: f64,
    /// Least mass any representing measure of evaluation at `p` puts on `p`;
    /// it is 1 exactly when `p` is a boundary point.
    pub min_mass_at_p: f64,
    pub boundary: bool,
    pub lp: LpDiagnostics,
}

/// Upper envelope of `u` at `points[p_index]`, with the boundary status of
/// the point determined independently from its representing measures.
pub fn boundary_envelope(fs: &FiniteFunctionSystem, p_index: usize, u: &[f64]) -> Result<EnvelopeReport, MinimaxError> {
    if p_index >= fs.len() {
        return Err(MinimaxError::BadPoint {
            index: p_index,
            len: fs.len(),
        });
    }
    let phi = fs.evaluation(p_index);
    let env = dominated_lp(fs, &phi, u, false)?;
    let mut indicator = vec![0.0; fs.len()];
    indicator[p_index] = 1.0;
    let mass = extension_lp(fs, &phi, &indicator, true)?;
    let gap = env.value - u[p_index];
    Ok(EnvelopeReport {
        p_index,
        point: fs.points[p_index],
        value: u[p_index],
        envelope: env.value,
        gap,
        min_mass_at_p: mass.value,
        boundary: mass.value >= 1.0 - 1e-9,
        lp: LpDiagnostics::of(&[&env, &mass]),
    })
}
