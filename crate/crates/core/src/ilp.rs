//! Depth-first branch and bound enumerating every binary code `b` with
//! `0 <= w_i . b + c_i <= 1` for all constraints `i`.
//!
//! Each node keeps, per constraint, the partial sum over fixed variables and
//! the smallest/largest amount the unfixed variables can still add. A node is
//! cut as soon as one constraint's reachable interval misses
//! `[-tol, 1 + tol]`.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::vertices::LiftingMap;

pub const DEFAULT_FEAS_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_POOL: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct BoxFeasibilityProblem {
    /// One row per constraint, one column per binary variable.
    pub weights: DenseMatrix,
    pub offsets: Vec<f64>,
}

impl BoxFeasibilityProblem {
    pub fn new(weights: DenseMatrix, offsets: Vec<f64>) -> Result<Self> {
        if weights.nrows() != offsets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weight rows, {} offsets",
                weights.nrows(),
                offsets.len()
            )));
        }
        Ok(Self { weights, offsets })
    }

    /// One constraint per non-anchor row of the lifting map.
    pub fn from_lifting(lifting: &LiftingMap) -> Self {
        let rows = lifting.non_anchor_rows();
        let weights = lifting.z.select_rows(&rows);
        let offsets = rows.iter().map(|&i| lifting.offset(i)).collect();
        Self { weights, offsets }
    }

    pub fn num_vars(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.weights.nrows()
    }

    /// Whether `code` satisfies every constraint within `tol`.
    pub fn is_feasible(&self, code: u64, tol: f64) -> bool {
        (0..self.num_constraints()).all(|i| {
            let mut v = self.offsets[i];
            for j in 0..self.num_vars() {
                if (code >> j) & 1 == 1 {
                    v += self.weights[(i, j)];
                }
            }
            (-tol..=1.0 + tol).contains(&v)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionPool {
    /// Feasible codes, ascending.
    pub codes: Vec<u64>,
    pub nodes_explored: u64,
    pub truncated: bool,
}

struct Search<'a> {
    problem: &'a BoxFeasibilityProblem,
    order: Vec<usize>,
    tol: f64,
    max_pool: usize,
    partial: Vec<f64>,
    rem_min: Vec<f64>,
    rem_max: Vec<f64>,
    codes: Vec<u64>,
    nodes: u64,
    truncated: bool,
}

impl Search<'_> {
    fn interval_ok(&self, i: usize) -> bool {
        self.partial[i] + self.rem_min[i] <= 1.0 + self.tol && self.partial[i] + self.rem_max[i] >= -self.tol
    }

    fn dfs(&mut self, depth: usize, code: u64) {
        if self.truncated {
            return;
        }
        self.nodes += 1;
        if depth == self.order.len() {
            if self.codes.len() == self.max_pool {
                self.truncated = true;
            } else {
                self.codes.push(code);
            }
            return;
        }
        let var = self.order[depth];
        let ncons = self.problem.num_constraints();

        // Fixing the variable removes it from the free range either way.
        for i in 0..ncons {
            let w = self.problem.weights[(i, var)];
            self.rem_min[i] -= w.min(0.0);
            self.rem_max[i] -= w.max(0.0);
        }

        let interior = |s: &Self, val: f64| {
            (0..ncons)
                .filter(|&i| {
                    let v = s.partial[i] + val * s.problem.weights[(i, var)];
                    (0.0..=1.0).contains(&v)
                })
                .count()
        };
        let first = if interior(self, 1.0) > interior(self, 0.0) { 1u64 } else { 0u64 };

        for val in [first, 1 - first] {
            if val == 1 {
                for i in 0..ncons {
                    self.partial[i] += self.problem.weights[(i, var)];
                }
            }
            if (0..ncons).all(|i| self.interval_ok(i)) {
                self.dfs(depth + 1, code | (val << var));
            }
            if val == 1 {
                for i in 0..ncons {
                    self.partial[i] -= self.problem.weights[(i, var)];
                }
            }
        }

        for i in 0..ncons {
            let w = self.problem.weights[(i, var)];
            self.rem_min[i] += w.min(0.0);
            self.rem_max[i] += w.max(0.0);
        }
    }
}

/// Enumerates all feasible codes, stopping once `max_pool` codes are found
/// and more exist (`truncated = true`; the pool is then a subset).
pub fn solve_box_feasibility(problem: &BoxFeasibilityProblem, feas_tol: f64, max_pool: usize) -> Result<SolutionPool> {
    let k = problem.num_vars();
    if k == 0 || k > 63 {
        return Err(Error::InvalidArgument(format!("need 1..=63 binary variables, got {k}")));
    }
    if max_pool == 0 {
        return Err(Error::InvalidArgument("max_pool must be positive".into()));
    }
    let ncons = problem.num_constraints();
    let weight_mass = |j: usize| (0..ncons).map(|i| problem.weights[(i, j)].abs()).sum::<f64>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| weight_mass(b).total_cmp(&weight_mass(a)).then(a.cmp(&b)));

    let rem_min = (0..ncons)
        .map(|i| (0..k).map(|j| problem.weights[(i, j)].min(0.0)).sum())
        .collect();
    let rem_max = (0..ncons)
        .map(|i| (0..k).map(|j| problem.weights[(i, j)].max(0.0)).sum())
        .collect();
    let mut search = Search {
        problem,
        order,
        tol: feas_tol,
        max_pool,
        partial: problem.offsets.clone(),
        rem_min,
        rem_max,
        codes: Vec::new(),
        nodes: 0,
        truncated: false,
    };
    if (0..ncons).all(|i| search.interval_ok(i)) {
        search.dfs(0, 0);
    }
    let mut codes = search.codes;
    codes.sort_unstable();
    Ok(SolutionPool {
        codes,
        nodes_explored: search.nodes,
        truncated: search.truncated,
    })
}
