//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use bincomp::{BinaryMatrix, DenseMatrix};
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_binary(rng: &mut impl Rng, m: usize, r: usize, p: f64) -> BinaryMatrix {
    let mut t = BinaryMatrix::zeros(m, r);
    for i in 0..m {
        for k in 0..r {
            t.set(i, k, rng.random::<f64>() < p);
        }
    }
    t
}

/// Columns uniform on the simplex via normalized exponentials.
pub fn random_simplex(rng: &mut impl Rng, r: usize, n: usize) -> DenseMatrix {
    let mut a = DenseMatrix::from_fn(r, n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    for j in 0..n {
        let s = a.column(j).sum();
        a.column_mut(j).unscale_mut(s);
    }
    a
}

/// Orthonormal basis of the column space of `m`, from the eigenvectors of
/// `m m'` with eigenvalue above `tol * largest`.
pub fn range_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DenseMatrix::zeros(m.nrows(), 0);
    }
    let eig = SymmetricEigen::new(m * m.transpose());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| top > 0.0 && eig.eigenvalues[i] > tol * top)
        .collect();
    DenseMatrix::from_fn(m.nrows(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

/// Dimension of the affine hull of the columns of `d`.
pub fn affine_dim(d: &DenseMatrix) -> usize {
    let p = d.column(0).into_owned();
    let dirs = DenseMatrix::from_fn(d.nrows(), d.ncols() - 1, |i, j| d[(i, j + 1)] - p[i]);
    range_basis(&dirs, 1e-12).ncols()
}

/// All `x ∈ {0,1}^m` in `aff(D)`, found by scanning every binary vector and
/// projecting onto the hull.
pub fn brute_force_affine_vertices(d: &DenseMatrix) -> Vec<Vec<u8>> {
    let m = d.nrows();
    assert!(m <= 20);
    let p = d.column(0).into_owned();
    let dirs = DenseMatrix::from_fn(m, d.ncols() - 1, |i, j| d[(i, j + 1)] - p[i]);
    let q = range_basis(&dirs, 1e-12);
    let mut out = Vec::new();
    for bits in 0u32..(1 << m) {
        let x = DVector::from_fn(m, |i, _| ((bits >> i) & 1) as f64);
        let v = &x - &p;
        let resid = &v - &q * (q.transpose() * &v);
        if resid.norm() <= 1e-8 * (1.0 + v.norm()) {
            out.push((0..m).map(|i| ((bits >> i) & 1) as u8).collect());
        }
    }
    out.sort();
    out
}

/// All `x ∈ {0,1}^m` in `span(D)`.
pub fn brute_force_span_vertices(d: &DenseMatrix) -> Vec<Vec<u8>> {
    let m = d.nrows();
    let q = range_basis(d, 1e-12);
    let mut out = Vec::new();
    for bits in 0u32..(1 << m) {
        let x = DVector::from_fn(m, |i, _| ((bits >> i) & 1) as f64);
        let resid = &x - &q * (q.transpose() * &x);
        if resid.norm() <= 1e-8 * (1.0 + x.norm()) {
            out.push((0..m).map(|i| ((bits >> i) & 1) as u8).collect());
        }
    }
    out.sort();
    out
}

/// Row-wise exhaustive `argmin_t ||d_i - t A||` with ties to the smaller code.
pub fn exhaustive_rows(d: &DenseMatrix, a: &DenseMatrix) -> BinaryMatrix {
    let r = a.nrows();
    let mut t = BinaryMatrix::zeros(d.nrows(), r);
    for i in 0..d.nrows() {
        let mut best = (f64::INFINITY, 0u64);
        for code in 0u64..(1 << r) {
            let mut err = 0.0;
            for j in 0..d.ncols() {
                let mut v = d[(i, j)];
                for k in 0..r {
                    if (code >> k) & 1 == 1 {
                        v -= a[(k, j)];
                    }
                }
                err += v * v;
            }
            if err < best.0 {
                best = (err, code);
            }
        }
        t.set_row_code(i, best.1);
    }
    t
}

/// Objective `||d_i - t A||^2` for a row code.
pub fn row_objective(d: &DenseMatrix, a: &DenseMatrix, i: usize, code: u64) -> f64 {
    (0..d.ncols())
        .map(|j| {
            let mut v = d[(i, j)];
            for k in 0..a.nrows() {
                if (code >> k) & 1 == 1 {
                    v -= a[(k, j)];
                }
            }
            v * v
        })
        .sum()
}

/// Minimum total column Hamming cost over all permutations.
pub fn exhaustive_alignment_cost(t_star: &BinaryMatrix, t: &BinaryMatrix) -> usize {
    use itertools::Itertools;
    let r = t.ncols();
    (0..r)
        .permutations(r)
        .map(|perm| {
            (0..r)
                .map(|k| {
                    t_star
                        .column(k)
                        .iter()
                        .zip(t.column(perm[k]))
                        .filter(|(a, b)| a != b)
                        .count()
                })
                .sum::<usize>()
        })
        .min()
        .unwrap_or(0)
}

/// Columns of a binary matrix as sorted byte vectors.
pub fn sorted_columns(t: &BinaryMatrix) -> Vec<Vec<u8>> {
    let mut cols: Vec<Vec<u8>> = t.columns().map(<[u8]>::to_vec).collect();
    cols.sort();
    cols
}

/// The worst-case matrix: `m - r` zero rows, `[I_{r-1} 0]`, one zero row.
pub fn face_matrix(m: usize, r: usize) -> BinaryMatrix {
    let mut t = BinaryMatrix::zeros(m, r);
    for k in 0..r - 1 {
        t.set(m - r + k, k, true);
    }
    t
}
