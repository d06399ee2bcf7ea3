//! Block coordinate descent over `(T, A)`: least squares in `A`, exhaustive
//! row-wise search in `T`.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{AConstraint, Diagnostics, FactorModel};
use crate::linalg;
use crate::matrix::{BinaryMatrix, DenseMatrix};

/// Largest `r` accepted by the exhaustive row search.
pub const MAX_ROW_BITS: usize = 24;
const RESYNC_BITS: u32 = 10;

/// Objective values `||D - T_k A_k||_F^2` after every `A` update.
#[derive(Clone, Debug, Default)]
pub struct DescentTrace {
    pub objectives: Vec<f64>,
    pub iterations: usize,
}

/// Best code for one row: minimizes `t'Gt - 2 h't` over `t ∈ {0,1}^r`.
///
/// Codes are visited in Gray order with `Gt` maintained incrementally and
/// resynchronized from scratch every `2^RESYNC_BITS` steps. Ties go to the
/// smaller code.
fn best_row_code(g: &DenseMatrix, h: &DVector<f64>) -> u64 {
    let r = h.len();
    let total = 1u64 << r;
    let eval = |code: u64, q: &mut DVector<f64>| -> f64 {
        q.fill(0.0);
        let mut f = 0.0;
        for k in 0..r {
            if (code >> k) & 1 == 1 {
                *q += g.column(k);
                f -= 2.0 * h[k];
            }
        }
        for k in 0..r {
            if (code >> k) & 1 == 1 {
                f += q[k];
            }
        }
        f
    };

    let mut q = DVector::zeros(r);
    let mut code = 0u64;
    let mut f = 0.0;
    let mut best = (f, code);
    for idx in 1..total {
        let next = idx ^ (idx >> 1);
        if idx.trailing_zeros() >= RESYNC_BITS {
            f = eval(next, &mut q);
        } else {
            let k = (next ^ code).trailing_zeros() as usize;
            if next & (1 << k) != 0 {
                f += 2.0 * q[k] + g[(k, k)] - 2.0 * h[k];
                q += g.column(k);
            } else {
                f += -2.0 * q[k] + g[(k, k)] + 2.0 * h[k];
                q -= g.column(k);
            }
        }
        code = next;
        if f < best.0 || (f == best.0 && code < best.1) {
            best = (f, code);
        }
    }
    best.1
}

/// Row-wise exhaustive update `T_i = argmin_t ||D_i - (lo + (hi - lo) t) A||²`.
pub fn update_t_rows_levels(d: &DenseMatrix, a: &DenseMatrix, levels: (f64, f64)) -> BinaryMatrix {
    let r = a.nrows();
    assert!(r <= MAX_ROW_BITS, "exhaustive row search limited to r <= {MAX_ROW_BITS}");
    assert_eq!(a.ncols(), d.ncols(), "A and D column counts differ");
    let (lo, hi) = levels;
    let span = hi - lo;
    let g = (a * a.transpose()) * (span * span);
    let baseline = a.row_sum() * lo;
    let codes: Vec<u64> = (0..d.nrows())
        .into_par_iter()
        .map(|i| {
            let shifted = d.row(i) - &baseline;
            let h = (a * shifted.transpose()) * span;
            best_row_code(&g, &h)
        })
        .collect();
    let mut t = BinaryMatrix::zeros(d.nrows(), r);
    for (i, code) in codes.into_iter().enumerate() {
        t.set_row_code(i, code);
    }
    t
}

/// Row-wise exhaustive update `T_i = argmin_{t ∈ {0,1}^r} ||D_i - t A||²`.
pub fn update_t_rows(d: &DenseMatrix, a: &DenseMatrix) -> BinaryMatrix {
    update_t_rows_levels(d, a, (0.0, 1.0))
}

pub(crate) fn block_descent_levels(
    d: &DenseMatrix,
    t0: &BinaryMatrix,
    max_iter: usize,
    levels: (f64, f64),
) -> (FactorModel, DescentTrace) {
    let (lo, hi) = levels;
    let mut t = t0.clone();
    let mut a = linalg::least_squares(&t.to_levels(lo, hi), d);
    let mut trace = DescentTrace::default();
    trace.objectives.push((d - t.to_levels(lo, hi) * &a).norm_squared());
    for _ in 0..max_iter {
        let next = update_t_rows_levels(d, &a, levels);
        trace.iterations += 1;
        if next == t {
            break;
        }
        t = next;
        a = linalg::least_squares(&t.to_levels(lo, hi), d);
        trace.objectives.push((d - t.to_levels(lo, hi) * &a).norm_squared());
    }
    let diagnostics = Diagnostics {
        iterations: trace.iterations,
        ..Default::default()
    };
    (FactorModel::new(d, t, a, None, AConstraint::Free, levels, diagnostics), trace)
}

/// Alternates `A <- argmin ||D - T A||` and the exhaustive row update of `T`
/// until `T` stops changing or `max_iter` sweeps are done.
pub fn block_descent(d: &DenseMatrix, t0: &BinaryMatrix, max_iter: usize) -> FactorModel {
    block_descent_levels(d, t0, max_iter, (0.0, 1.0)).0
}

/// [`block_descent`] also returning the objective trace.
pub fn block_descent_traced(d: &DenseMatrix, t0: &BinaryMatrix, max_iter: usize) -> (FactorModel, DescentTrace) {
    block_descent_levels(d, t0, max_iter, (0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_mixing_thresholds_at_half() {
        let d = DenseMatrix::from_row_slice(3, 3, &[0.2, 0.7, 0.5, 0.51, 0.49, 1.3, -0.4, 0.9, 0.1]);
        let t = update_t_rows(&d, &DenseMatrix::identity(3, 3));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.get(i, j), d[(i, j)] > 0.5, "({i},{j})");
            }
        }
    }

    #[test]
    fn exact_ties_prefer_smaller_code() {
        // Zero mixing matrix: every t gives the same objective.
        let d = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let t = update_t_rows(&d, &DenseMatrix::zeros(3, 2));
        assert_eq!(t.row_code(0), 0);
        assert_eq!(t.row_code(1), 0);
    }

    #[test]
    fn scalar_case() {
        let d = DenseMatrix::from_column_slice(4, 1, &[0.2, 0.6, 0.49, 0.51]);
        let t = update_t_rows(&d, &DenseMatrix::from_element(1, 1, 1.0));
        let got: Vec<bool> = (0..4).map(|i| t.get(i, 0)).collect();
        assert_eq!(got, vec![false, true, false, true]);
    }
}
