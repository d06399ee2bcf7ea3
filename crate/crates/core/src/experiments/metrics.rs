use serde::{Deserialize, Serialize};

use crate::matrix::{BinaryMatrix, DenseMatrix};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials). Returns `assign[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[col_owner[j] - 1] = j - 1;
    }
    assign
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// `||T* - T Π||_F^2 / (m r)` after optimal column alignment.
    pub hamming_norm: f64,
    /// Same quantity without alignment.
    pub hamming_raw: f64,
    /// `||T* A* - T A||_F / sqrt(m n)`.
    pub rmse_signal: f64,
    /// `||T A - D||_F / sqrt(m n)`.
    pub rmse_fit: f64,
    /// `permutation[k]` is the column of `T` matched to column `k` of `T*`.
    pub permutation: Vec<usize>,
}

/// Aligns the columns of `t` to `t_star` by minimum total Hamming distance
/// and computes the three error measures.
pub fn align_and_score(
    t_star: &BinaryMatrix,
    a_star: &DenseMatrix,
    t: &BinaryMatrix,
    a: &DenseMatrix,
    d: &DenseMatrix,
) -> ScoreReport {
    assert_eq!((t_star.nrows(), t_star.ncols()), (t.nrows(), t.ncols()), "T shapes differ");
    let (m, r) = (t.nrows(), t.ncols());
    let n = d.ncols();
    let cost: Vec<Vec<f64>> = (0..r)
        .map(|k| {
            (0..r)
                .map(|l| {
                    t_star
                        .column(k)
                        .iter()
                        .zip(t.column(l))
                        .filter(|(x, y)| x != y)
                        .count() as f64
                })
                .collect()
        })
        .collect();
    let permutation = min_cost_assignment(&cost);
    let aligned = t.permute_columns(&permutation);
    let mr = (m * r) as f64;
    let mn = ((m * n) as f64).sqrt();
    let fitted = t.to_dense() * a;
    ScoreReport {
        hamming_norm: t_star.hamming(&aligned) as f64 / mr,
        hamming_raw: t_star.hamming(t) as f64 / mr,
        rmse_signal: (t_star.to_dense() * a_star - &fitted).norm() / mn,
        rmse_fit: (&fitted - d).norm() / mn,
        permutation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_small_cases() {
        assert_eq!(min_cost_assignment(&[vec![5.0]]), vec![0]);
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn identical_factors_score_zero() {
        let t = BinaryMatrix::from_columns(3, &[vec![1, 0, 1], vec![0, 1, 1]]);
        let a = DenseMatrix::from_row_slice(2, 2, &[0.3, 0.6, 0.7, 0.4]);
        let d = t.to_dense() * &a;
        let s = align_and_score(&t, &a, &t, &a, &d);
        assert_eq!(s.hamming_norm, 0.0);
        assert_eq!(s.rmse_signal, 0.0);
        assert_eq!(s.permutation, vec![0, 1]);
    }

    #[test]
    fn reversed_columns_align() {
        let t = BinaryMatrix::from_columns(3, &[vec![1, 0, 1], vec![0, 1, 1], vec![0, 0, 1]]);
        let a = DenseMatrix::identity(3, 2);
        let rev = t.permute_columns(&[2, 1, 0]);
        let s = align_and_score(&t, &a, &rev, &a, &(t.to_dense() * &a));
        assert_eq!(s.hamming_norm, 0.0);
        assert!(s.hamming_raw > 0.0);
        assert_eq!(s.permutation, vec![2, 1, 0]);
    }
}
