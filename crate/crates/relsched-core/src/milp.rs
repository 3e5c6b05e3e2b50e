//! Self-contained linear programming and branch-and-bound mixed-integer
//! solving for the configuration programs.
//!
//! The simplex is a dense-tableau, two-phase primal method.  Pricing is
//! Dantzig's rule with an automatic fallback to Bland's rule after an
//! iteration threshold, which guarantees termination on degenerate models.
//! Variable lower bounds are shifted into the right-hand side; finite upper
//! bounds become explicit rows — configuration models at desk scale are
//! small enough that simplicity and determinism beat speed.
//!
//! Branch-and-bound is best-first on the LP relaxation bound, branching on
//! the most fractional integral variable (ties: lowest index).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

/// Constraint relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `<=`
    Le,
    /// `=`
    Eq,
    /// `>=`
    Ge,
}

/// One declared variable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Variable {
    /// Display name used in model dumps.
    pub name: String,
    /// Finite lower bound.
    pub lower: f64,
    /// Upper bound; `f64::INFINITY` for unbounded above.
    pub upper: f64,
    /// Whether the variable must be integral in a MILP solve.
    pub integral: bool,
}

/// One sparse constraint row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    /// `(variable index, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    /// Relation between the row and the right-hand side.
    pub sense: Sense,
    /// Right-hand side.
    pub rhs: f64,
}

/// A minimization model.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LinearModel {
    /// Declared variables.
    pub variables: Vec<Variable>,
    /// Constraint rows.
    pub constraints: Vec<Constraint>,
    /// Sparse objective `(variable index, coefficient)`; minimized.
    pub objective: Vec<(usize, f64)>,
}

impl LinearModel {
    /// Empty model.
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable and returns its index.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integral: bool,
        obj: f64,
    ) -> usize {
        let idx = self.variables.len();
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integral,
        });
        if obj != 0.0 {
            self.objective.push((idx, obj));
        }
        idx
    }

    /// Adds a constraint row; panics on an undeclared variable index.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        for &(v, _) in &coeffs {
            assert!(v < self.variables.len(), "constraint references undeclared variable {v}");
        }
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    /// Plain-text dump, one constraint per line, for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, coeffs: &[(usize, f64)]| {
            for (k, &(v, c)) in coeffs.iter().enumerate() {
                if k > 0 {
                    let _ = write!(out, " + ");
                }
                let _ = write!(out, "{c}*{}", self.variables[v].name);
            }
        };
        let _ = write!(out, "min ");
        term(&mut out, &self.objective);
        let _ = writeln!(out);
        for c in &self.constraints {
            term(&mut out, &c.coeffs);
            let rel = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        for v in &self.variables {
            let _ = writeln!(
                out,
                "{} in [{}, {}]{}",
                v.name,
                v.lower,
                v.upper,
                if v.integral { " integer" } else { "" }
            );
        }
        out
    }
}

/// Solve outcome classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    /// Proven optimal.
    Optimal,
    /// No feasible point.
    Infeasible,
    /// Objective unbounded below.
    Unbounded,
    /// Node or iteration budget exhausted; `values` carry the incumbent if
    /// one was found.
    BudgetExceeded,
}

/// Solution record for both LP and MILP solves.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MilpSolution {
    /// Outcome.
    pub status: MilpStatus,
    /// Objective value (meaningful for `Optimal`, incumbent for
    /// `BudgetExceeded` when `values` is nonempty).
    pub objective: f64,
    /// Variable values in declaration order.
    pub values: Vec<f64>,
}

/// Feasibility tolerance on constraint residuals.
pub const FEAS_TOL: f64 = 1e-7;
/// Integrality tolerance in branch-and-bound.
pub const INT_TOL: f64 = 1e-6;
/// Pivot threshold below which a coefficient counts as zero.
const PIVOT_TOL: f64 = 1e-9;
/// Dantzig-rule iterations before switching to Bland's rule.
const BLAND_SWITCH: usize = 5_000;
/// Hard simplex iteration cap.
const MAX_ITERS: usize = 200_000;

/// Solves the LP relaxation (integrality flags ignored).
pub fn solve_lp(model: &LinearModel) -> Result<MilpSolution> {
    solve_lp_with_bounds(model, None)
}

/// LP solve with per-variable bound overrides (used by branch-and-bound).
fn solve_lp_with_bounds(
    model: &LinearModel,
    overrides: Option<&[(f64, f64)]>,
) -> Result<MilpSolution> {
    let n = model.variables.len();
    let bound = |v: usize| -> (f64, f64) {
        match overrides {
            Some(b) => b[v],
            None => (model.variables[v].lower, model.variables[v].upper),
        }
    };
    for v in 0..n {
        let (l, u) = bound(v);
        if !l.is_finite() {
            return Err(Error::InvalidParams(format!(
                "variable {} has a non-finite lower bound",
                model.variables[v].name
            )));
        }
        if u < l - FEAS_TOL {
            return Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                objective: f64::INFINITY,
                values: Vec::new(),
            });
        }
    }

    // Assemble rows over shifted variables x̂ = x - l >= 0:
    //   Σ a_v x̂_v  (sense)  rhs - Σ a_v l_v
    // plus a row x̂_v <= u_v - l_v per finite upper bound.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for c in &model.constraints {
        let mut dense = vec![0.0; n];
        let mut shift = 0.0;
        for &(v, a) in &c.coeffs {
            dense[v] += a;
            shift += a * bound(v).0;
        }
        rows.push((dense, c.sense, c.rhs - shift));
    }
    for v in 0..n {
        let (l, u) = bound(v);
        if u.is_finite() {
            let mut dense = vec![0.0; n];
            dense[v] = 1.0;
            rows.push((dense, Sense::Le, u - l));
        }
    }
    // Normalize to rhs >= 0 (flip the sense when negating).
    for (dense, sense, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            for a in dense.iter_mut() {
                *a = -*a;
            }
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    // Column layout: [structural 0..n | slack/surplus | artificial].
    let mut n_slack = 0;
    let mut n_art = 0;
    for (_, sense, _) in &rows {
        match sense {
            Sense::Le => n_slack += 1,
            Sense::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Sense::Eq => n_art += 1,
        }
    }
    let total = n + n_slack + n_art;
    // Tableau: m rows of `total + 1` (last column = rhs).
    let mut tab = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![usize::MAX; m];
    let art_start = n + n_slack;
    {
        let mut s = n;
        let mut a = art_start;
        for (r, (dense, sense, rhs)) in rows.iter().enumerate() {
            tab[r][..n].copy_from_slice(dense);
            tab[r][total] = *rhs;
            match sense {
                Sense::Le => {
                    tab[r][s] = 1.0;
                    basis[r] = s;
                    s += 1;
                }
                Sense::Ge => {
                    tab[r][s] = -1.0;
                    s += 1;
                    tab[r][a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
                Sense::Eq => {
                    tab[r][a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
            }
        }
    }

    let dense_obj = {
        let mut o = vec![0.0; total];
        for &(v, c) in &model.objective {
            o[v] += c;
        }
        o
    };

    // Phase 1: minimize the artificial sum.
    if n_art > 0 {
        let mut phase1 = vec![0.0; total];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        let value = simplex(&mut tab, &mut basis, &phase1, total, None)?;
        if value > FEAS_TOL {
            return Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                objective: f64::INFINITY,
                values: Vec::new(),
            });
        }
        // Pivot remaining artificials out of the basis where possible.
        for r in 0..m {
            if basis[r] >= art_start {
                if let Some(col) = (0..art_start).find(|&c| tab[r][c].abs() > PIVOT_TOL) {
                    pivot(&mut tab, &mut basis, r, col, total);
                }
                // If no pivot column exists the row is redundant (all zero);
                // the artificial stays basic at value 0, which is harmless as
                // long as it can never re-enter — phase 2 bans those columns.
            }
        }
    }

    // Phase 2 with artificial columns banned.
    let banned = art_start;
    simplex(&mut tab, &mut basis, &dense_obj, banned, Some(total))?;

    // Extract shifted values, undo the shift.
    let mut values = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            values[b] = tab[r][total];
        }
    }
    for (v, val) in values.iter_mut().enumerate() {
        *val += bound(v).0;
    }
    let objective: f64 = model.objective.iter().map(|&(v, c)| c * values[v]).sum();
    Ok(MilpSolution {
        status: MilpStatus::Optimal,
        objective,
        values,
    })
}

/// Runs primal simplex on the tableau, minimizing `obj` over columns
/// `[0, cols)`; `rhs_col` overrides the rhs column index when the tableau is
/// wider than the allowed columns (phase 2 bans artificials).  Returns the
/// reached objective value.  Errors with `Unbounded` when a ray is found.
fn simplex(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &[f64],
    cols: usize,
    rhs_override: Option<usize>,
) -> Result<f64> {
    let m = tab.len();
    let rhs_col = rhs_override.unwrap_or(cols);
    for iter in 0..MAX_ITERS {
        // Reduced costs: c_j - c_B B^{-1} A_j, computed from the tableau.
        let mut entering: Option<usize> = None;
        let mut best = -PIVOT_TOL;
        for j in 0..cols {
            if basis.contains(&j) {
                continue;
            }
            let mut red = obj[j];
            for r in 0..m {
                let cb = if basis[r] < obj.len() { obj[basis[r]] } else { 0.0 };
                if cb != 0.0 {
                    red -= cb * tab[r][j];
                }
            }
            if iter < BLAND_SWITCH {
                if red < best {
                    best = red;
                    entering = Some(j);
                }
            } else if red < -PIVOT_TOL {
                // Bland: first improving column.
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            // Optimal: compute objective from basic values.
            let mut val = 0.0;
            for r in 0..m {
                if basis[r] < obj.len() {
                    val += obj[basis[r]] * tab[r][rhs_col];
                }
            }
            return Ok(val);
        };
        // Ratio test (Bland tie-break: lowest basis index).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            if tab[r][col] > PIVOT_TOL {
                let ratio = tab[r][rhs_col] / tab[r][col];
                if ratio < best_ratio - PIVOT_TOL
                    || (ratio < best_ratio + PIVOT_TOL
                        && leave.map_or(true, |lr| basis[r] < basis[lr]))
                {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(row) = leave else {
            return Err(Error::Unbounded("simplex found an improving ray".into()));
        };
        pivot(tab, basis, row, col, rhs_col);
    }
    Err(Error::CapExceeded(
        "simplex iteration cap exceeded".into(),
    ))
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, rhs_col: usize) {
    let width = rhs_col + 1;
    let p = tab[row][col];
    for j in 0..width {
        tab[row][j] /= p;
    }
    for r in 0..tab.len() {
        if r != row && tab[r][col].abs() > 0.0 {
            let f = tab[r][col];
            for j in 0..width {
                let d = tab[row][j];
                tab[r][j] -= f * d;
            }
        }
    }
    basis[row] = col;
}

/// Node budget for branch-and-bound.
#[derive(Clone, Copy, Debug)]
pub struct MilpBudget {
    /// Maximum explored nodes before giving up with the incumbent.
    pub max_nodes: usize,
}

impl Default for MilpBudget {
    fn default() -> Self {
        MilpBudget { max_nodes: 200_000 }
    }
}

struct Node {
    bound: f64,
    bounds: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; order by *descending* bound so the heap
        // pops the smallest LP bound first.
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Solves the mixed-integer model by best-first branch-and-bound.
pub fn solve_milp(model: &LinearModel, budget: &MilpBudget) -> Result<MilpSolution> {
    let root_bounds: Vec<(f64, f64)> = model.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let root = solve_lp_with_bounds(model, Some(&root_bounds))?;
    match root.status {
        MilpStatus::Infeasible => return Ok(root),
        MilpStatus::Optimal => {}
        _ => return Ok(root),
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: root.objective,
        bounds: root_bounds,
    });
    let mut incumbent: Option<MilpSolution> = None;
    let mut nodes = 0usize;

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - 1e-9 {
                continue; // bound-dominated
            }
        }
        nodes += 1;
        if nodes > budget.max_nodes {
            return Ok(MilpSolution {
                status: MilpStatus::BudgetExceeded,
                objective: incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective),
                values: incumbent.map_or_else(Vec::new, |i| i.values),
            });
        }
        let sol = match solve_lp_with_bounds(model, Some(&node.bounds)) {
            Ok(s) => s,
            Err(Error::Unbounded(_)) => {
                return Err(Error::Unbounded(
                    "MILP relaxation unbounded; add explicit bounds".into(),
                ))
            }
            Err(e) => return Err(e),
        };
        if sol.status != MilpStatus::Optimal {
            continue;
        }
        if let Some(inc) = &incumbent {
            if sol.objective >= inc.objective - 1e-9 {
                continue;
            }
        }
        // Most fractional integral variable; ties by lowest index.
        let mut branch: Option<(usize, f64)> = None;
        let mut best_frac = INT_TOL;
        for (v, var) in model.variables.iter().enumerate() {
            if !var.integral {
                continue;
            }
            let x = sol.values[v];
            let frac = (x - x.round()).abs();
            let dist_to_half = 0.5 - (x.fract().abs() - 0.5).abs();
            if frac > INT_TOL && dist_to_half > best_frac {
                best_frac = dist_to_half;
                branch = Some((v, x));
            } else if frac > INT_TOL && branch.is_none() {
                branch = Some((v, x));
            }
        }
        match branch {
            None => {
                // Integer feasible: round near-integers exactly.
                let mut vals = sol.values.clone();
                for (v, var) in model.variables.iter().enumerate() {
                    if var.integral {
                        vals[v] = vals[v].round();
                    }
                }
                let objective: f64 = model.objective.iter().map(|&(v, c)| c * vals[v]).sum();
                if incumbent
                    .as_ref()
                    .map_or(true, |i| objective < i.objective - 1e-12)
                {
                    incumbent = Some(MilpSolution {
                        status: MilpStatus::Optimal,
                        objective,
                        values: vals,
                    });
                }
            }
            Some((v, x)) => {
                let floor = x.floor();
                for (lo, hi) in [
                    (node.bounds[v].0, floor),
                    (floor + 1.0, node.bounds[v].1),
                ] {
                    if lo > hi + FEAS_TOL {
                        continue;
                    }
                    let mut b = node.bounds.clone();
                    b[v] = (lo, hi);
                    heap.push(Node {
                        bound: sol.objective,
                        bounds: b,
                    });
                }
            }
        }
    }

    // The tree is exhausted, so the incumbent (if any) is proven optimal.
    match incumbent {
        Some(s) => {
            debug_assert!(check_feasible(model, &s.values));
            Ok(s)
        }
        None => Ok(MilpSolution {
            status: MilpStatus::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
        }),
    }
}

/// Residual check used in debug assertions and tests.
pub fn check_feasible(model: &LinearModel, values: &[f64]) -> bool {
    for (v, var) in model.variables.iter().enumerate() {
        if values[v] < var.lower - FEAS_TOL || values[v] > var.upper + FEAS_TOL {
            return false;
        }
        if var.integral && (values[v] - values[v].round()).abs() > INT_TOL {
            return false;
        }
    }
    for c in &model.constraints {
        let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * values[v]).sum();
        let scale = 1.0 + lhs.abs().max(c.rhs.abs());
        let ok = match c.sense {
            Sense::Le => lhs <= c.rhs + FEAS_TOL * scale,
            Sense::Ge => lhs >= c.rhs - FEAS_TOL * scale,
            Sense::Eq => (lhs - c.rhs).abs() <= FEAS_TOL * scale,
        };
        if !ok {
            return false;
        }
    }
    true
}
