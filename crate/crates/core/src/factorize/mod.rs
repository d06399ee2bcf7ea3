//! End-to-end factorization drivers.
//!
//! * [`factorize_exact`]: vertex enumeration followed by selection of `r`
//!   independent vertices and a solve for the right factor.
//! * [`factorize_three_way`]: `D = T W A'` with both outer factors binary.
//! * [`factorize_approximate`]: truncated-SVD lifting with candidate
//!   rounding, restarts and optional refinements.
//! * [`block_descent`]: alternating least squares / exhaustive row updates.

mod approx;
mod descent;
mod exact;

pub use approx::{
    backward_eliminate, factorize_approximate, find_vertices_approximate, rounding_distances, ApproxConfig,
    Refine, RowChoice,
};
pub use descent::{block_descent, block_descent_traced, update_t_rows, update_t_rows_levels, DescentTrace};
pub use exact::{factorize_exact, factorize_three_way, select_independent, ExactMode, ExactOptions};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::matrix::{BinaryMatrix, DenseMatrix};

/// Constraint imposed on the columns of the right factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AConstraint {
    /// Columns sum to one.
    Affine,
    Free,
    /// Columns on the probability simplex.
    Simplex,
}

impl AConstraint {
    /// Fits the right factor for a fixed left factor.
    pub fn fit(self, t: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(match self {
            AConstraint::Free => linalg::least_squares(t, d),
            AConstraint::Affine => linalg::affine_least_squares(t, d),
            AConstraint::Simplex => linalg::simplex_least_squares(t, d)?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub vertex_count: Option<usize>,
    pub restarts_used: usize,
    pub iterations: usize,
    pub candidate_pool: Option<usize>,
    pub subsets_checked: Option<usize>,
}

/// Result of a factorization `D ≈ T A` (or `D ≈ T W A` for the three-way
/// model, where `a` then holds the transposed binary right factor).
#[derive(Clone, Debug)]
pub struct FactorModel {
    pub t: BinaryMatrix,
    pub a: DenseMatrix,
    pub w: Option<DenseMatrix>,
    pub a_constraint: AConstraint,
    /// Levels `(lo, hi)` standing in for {0, 1} when fitting.
    pub levels: (f64, f64),
    pub residual_fro: f64,
    pub diagnostics: Diagnostics,
}

impl FactorModel {
    pub(crate) fn new(
        d: &DenseMatrix,
        t: BinaryMatrix,
        a: DenseMatrix,
        w: Option<DenseMatrix>,
        a_constraint: AConstraint,
        levels: (f64, f64),
        diagnostics: Diagnostics,
    ) -> Self {
        let mut model = Self {
            t,
            a,
            w,
            a_constraint,
            levels,
            residual_fro: 0.0,
            diagnostics,
        };
        model.residual_fro = model.recompute_residual(d);
        model
    }

    pub fn rank(&self) -> usize {
        self.t.ncols()
    }

    /// The left factor at its fitting levels, `lo + (hi - lo) T`.
    pub fn fitted_t(&self) -> DenseMatrix {
        self.t.to_levels(self.levels.0, self.levels.1)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let t = self.fitted_t();
        match &self.w {
            Some(w) => t * w * &self.a,
            None => t * &self.a,
        }
    }

    pub fn recompute_residual(&self, d: &DenseMatrix) -> f64 {
        (d - self.reconstruct()).norm()
    }
}
