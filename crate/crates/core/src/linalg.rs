//! Dense linear-algebra kernels: rank-revealing pivot selection, truncated
//! SVD, least squares and simplex-constrained least squares.

use nalgebra::{DVector, SymmetricEigen, SVD};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SIMPLEX_MAX_ITER: usize = 10_000;
const SIMPLEX_KKT_TOL: f64 = 1e-6;

/// Independent columns of a matrix and independent rows of the selected
/// column block, as found by column-pivoted QR.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotSelection {
    pub column_indices: Vec<usize>,
    pub row_indices: Vec<usize>,
    pub numerical_rank: usize,
    pub rank_tolerance: f64,
}

/// Leading left singular vectors with their singular values, largest first.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub basis: DenseMatrix,
    pub singular_values: Vec<f64>,
}

/// Householder QR with Businger-Golub column pivoting.
///
/// Returns the pivot order and the magnitudes `|R_jj|` for the first
/// `max_steps` steps. The column with the largest remaining norm is chosen
/// at every step; ties go to the lowest index.
pub(crate) fn pivoted_qr_order(m: &DenseMatrix, max_steps: usize) -> (Vec<usize>, Vec<f64>) {
    let (nr, nc) = m.shape();
    let steps = max_steps.min(nr).min(nc);
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..nc).collect();
    let mut pivots = Vec::with_capacity(steps);

    for j in 0..steps {
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..nc {
            let norm = a.view((j, c), (nr - j, 1)).norm_squared();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        if best != j {
            a.swap_columns(j, best);
            perm.swap(j, best);
        }
        let alpha = best_norm.sqrt();
        pivots.push(alpha);
        if alpha == 0.0 {
            break;
        }

        // Householder reflector zeroing a[j+1.., j].
        let mut v: DVector<f64> = a.view((j, j), (nr - j, 1)).column(0).into_owned();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..nc {
            let mut col = a.view_mut((j, c), (nr - j, 1));
            let dot = v.dot(&col.column(0));
            let scale = 2.0 * dot / vnorm2;
            for i in 0..nr - j {
                col[(i, 0)] -= scale * v[i];
            }
        }
    }
    perm.truncate(pivots.len());
    (perm, pivots)
}

/// Selects `k` independent columns of `m` and `k` independent rows of the
/// selected column block. With `k = None` the numerical rank is used.
pub fn select_pivots(m: &DenseMatrix, k: Option<usize>, tol: f64) -> Result<PivotSelection> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("rank tolerance must be positive".into()));
    }
    let (order, pivots) = pivoted_qr_order(m, usize::MAX);
    let leading = pivots.first().copied().unwrap_or(0.0);
    let rank = if leading == 0.0 {
        0
    } else {
        pivots.iter().take_while(|&&p| p > tol * leading).count()
    };
    let k = match k {
        Some(k) if k > rank => {
            return Err(Error::RankDeficient {
                requested: k,
                numerical: rank,
            })
        }
        Some(k) => k,
        None => rank,
    };
    let column_indices: Vec<usize> = order[..k].to_vec();
    let row_indices = if k == 0 {
        Vec::new()
    } else {
        let block = m.select_columns(&column_indices);
        let (rows, _) = pivoted_qr_order(&block.transpose(), k);
        rows
    };
    Ok(PivotSelection {
        column_indices,
        row_indices,
        numerical_rank: rank,
        rank_tolerance: tol,
    })
}

/// Leading `k` left singular vectors of `m`.
pub fn truncated_svd(m: &DenseMatrix, k: usize) -> Result<SpectralBasis> {
    let min_dim = m.nrows().min(m.ncols());
    if k == 0 || k > min_dim {
        return Err(Error::DimensionMismatch(format!(
            "truncation rank {k} outside 1..={min_dim}"
        )));
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(SpectralBasis {
        basis: u.select_columns(&order),
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
    })
}

/// Ratio of largest to smallest singular value; infinite when singular.
pub fn condition_number(m: &DenseMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Minimum-norm solution of `min_A ||D - T A||_F`.
pub fn least_squares(t: &DenseMatrix, d: &DenseMatrix) -> DenseMatrix {
    assert_eq!(t.nrows(), d.nrows(), "row count mismatch");
    let r = t.ncols();
    if r == 0 {
        return DenseMatrix::zeros(0, d.ncols());
    }
    let svd = SVD::new(t.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * (t.nrows().max(r) as f64) * f64::EPSILON;
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut ut_d = u.transpose() * d;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        ut_d.row_mut(i).scale_mut(inv);
    }
    v_t.transpose() * ut_d
}

/// `argmin ||D - T A||_F` subject to every column of `A` summing to one.
///
/// The last row of `A` is eliminated through the constraint, leaving an
/// unconstrained problem in the differences `T_k - T_r`.
pub fn affine_least_squares(t: &DenseMatrix, d: &DenseMatrix) -> DenseMatrix {
    assert_eq!(t.nrows(), d.nrows(), "row count mismatch");
    let r = t.ncols();
    assert!(r >= 1, "affine least squares needs r >= 1");
    let last = t.column(r - 1).into_owned();
    let mut reduced = t.columns(0, r - 1).into_owned();
    for mut col in reduced.column_iter_mut() {
        col -= &last;
    }
    let mut target = d.clone();
    for mut col in target.column_iter_mut() {
        col -= &last;
    }
    let head = least_squares(&reduced, &target);
    let mut a = DenseMatrix::zeros(r, d.ncols());
    a.rows_mut(0, r - 1).copy_from(&head);
    for j in 0..d.ncols() {
        a[(r - 1, j)] = 1.0 - head.column(j).sum();
    }
    a
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j as f64 + 1.0);
        if uj - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Euclidean projection onto `{x : 0 <= x <= cap, sum(x) = 1}` by bisection
/// on the shift. Requires `cap * len >= 1`.
pub fn project_capped_simplex(v: &DVector<f64>, cap: f64) -> DVector<f64> {
    assert!(cap * v.len() as f64 >= 1.0 - 1e-12, "capped simplex is empty");
    let mass = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.min() - cap;
    let mut hi = v.max();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut x = v.map(|x| (x - tau).clamp(0.0, cap));
    // Spread the bisection remainder over the free coordinates.
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0 && x[i] < cap).collect();
    if !free.is_empty() {
        let excess = (x.sum() - 1.0) / free.len() as f64;
        for i in free {
            x[i] -= excess;
        }
    }
    x
}

/// KKT gap for `min 0.5 a'Ga - h'a` over the simplex: the spread between the
/// largest gradient entry on the support and the smallest gradient entry.
fn simplex_kkt_gap(g_mat: &DenseMatrix, h: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let grad = g_mat * a - h;
    let min_all = grad.min();
    let max_supp = (0..a.len())
        .filter(|&k| a[k] > 0.0)
        .map(|k| grad[k])
        .fold(f64::NEG_INFINITY, f64::max);
    max_supp - min_all
}

/// Solves the equality-constrained problem restricted to the support of `x`.
fn polish_on_support(g_mat: &DenseMatrix, h: &DVector<f64>, x: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&k| x[k] > 0.0).collect();
    let s = support.len();
    if s == 0 {
        return None;
    }
    let mut kkt = DenseMatrix::zeros(s + 1, s + 1);
    let mut rhs = DenseMatrix::zeros(s + 1, 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = g_mat[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
        rhs[(a, 0)] = h[i];
    }
    rhs[(s, 0)] = 1.0;
    let sol = least_squares(&kkt, &rhs);
    if (&kkt * &sol - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
        return None;
    }
    let mut out = DVector::zeros(x.len());
    for (a, &i) in support.iter().enumerate() {
        let w = sol[(a, 0)];
        if w < -1e-12 {
            return None;
        }
        out[i] = w.max(0.0);
    }
    let total = out.sum();
    if total <= 0.0 {
        return None;
    }
    Some(out / total)
}

fn simplex_ls_column(g_mat: &DenseMatrix, h: &DVector<f64>, lipschitz: f64) -> Result<DVector<f64>> {
    let r = h.len();
    let tol = SIMPLEX_KKT_TOL * lipschitz.max(1.0);
    let objective = |a: &DVector<f64>| 0.5 * a.dot(&(g_mat * a)) - h.dot(a);
    if lipschitz == 0.0 {
        return Ok(DVector::from_element(r, 1.0 / r as f64));
    }
    let step = 1.0 / lipschitz;
    let mut x = DVector::from_element(r, 1.0 / r as f64);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x);

    for iter in 0..SIMPLEX_MAX_ITER {
        let grad = g_mat * &y - h;
        let x_new = project_simplex(&(&y - grad * step));
        let f_new = objective(&x_new);
        if f_new > f_prev {
            // Adaptive restart: drop momentum and take a plain projected step.
            t = 1.0;
            let grad_x = g_mat * &x - h;
            let x_plain = project_simplex(&(&x - grad_x * step));
            f_prev = objective(&x_plain);
            y = x_plain.clone();
            x = x_plain;
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            t = t_new;
            x = x_new;
            f_prev = f_new;
        }

        if iter % 10 == 0 {
            if let Some(p) = polish_on_support(g_mat, h, &x) {
                if simplex_kkt_gap(g_mat, h, &p) <= tol {
                    return Ok(p);
                }
            }
            if simplex_kkt_gap(g_mat, h, &x) <= tol {
                return Ok(x);
            }
        }
    }
    if simplex_kkt_gap(g_mat, h, &x) <= tol {
        return Ok(x);
    }
    Err(Error::ConvergenceFailure {
        iterations: SIMPLEX_MAX_ITER,
        residual: simplex_kkt_gap(g_mat, h, &x),
    })
}

/// `argmin ||D - T A||_F` with every column of `A` on the probability simplex.
///
/// Each column is solved independently by accelerated projected gradient
/// with step `1 / ||T'T||_2`, followed by an equality-constrained solve on
/// the detected support.
pub fn simplex_least_squares(t: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    if t.ncols() == 0 {
        return Err(Error::InvalidArgument("simplex least squares needs r >= 1".into()));
    }
    if t.nrows() != d.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "T has {} rows, D has {}",
            t.nrows(),
            d.nrows()
        )));
    }
    let g_mat = t.transpose() * t;
    let lipschitz = SymmetricEigen::new(g_mat.clone()).eigenvalues.max().max(0.0);
    let h_all = t.transpose() * d;
    let cols: Vec<DVector<f64>> = (0..d.ncols())
        .into_par_iter()
        .map(|j| simplex_ls_column(&g_mat, &h_all.column(j).into_owned(), lipschitz))
        .collect::<Result<_>>()?;
    Ok(DenseMatrix::from_columns(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pivots_of_identity() {
        let sel = select_pivots(&DenseMatrix::identity(3, 3), Some(2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sel.numerical_rank, 3);
        let mut cols = sel.column_indices.clone();
        cols.sort();
        assert_eq!(cols, vec![0, 1]);
        let mut rows = sel.row_indices.clone();
        rows.sort();
        assert_eq!(rows, vec![0, 1]);
    }

    #[test]
    fn pivots_of_zero_matrix() {
        let z = DenseMatrix::zeros(3, 4);
        let sel = select_pivots(&z, None, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sel.numerical_rank, 0);
        assert!(sel.column_indices.is_empty());
        assert!(matches!(
            select_pivots(&z, Some(1), DEFAULT_RANK_TOL),
            Err(Error::RankDeficient { requested: 1, numerical: 0 })
        ));
    }

    #[test]
    fn pivots_of_rank_two_product() {
        let u = random(6, 2, 1);
        let v = random(2, 5, 2);
        let m = &u * &v;
        let sel = select_pivots(&m, None, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sel.numerical_rank, 2);
        let (r, c) = (&sel.row_indices, &sel.column_indices);
        let det = m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])];
        assert!(det.abs() > 1e-6, "det = {det}");
    }

    #[test]
    fn svd_of_diagonal() {
        let m = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let sb = truncated_svd(&m, 2).unwrap();
        assert!((sb.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((sb.singular_values[1] - 2.0).abs() < 1e-12);
        assert!((sb.basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((sb.basis[(1, 1)].abs() - 1.0).abs() < 1e-12);
        assert!(sb.basis.row(2).norm() < 1e-12);
        assert!(matches!(truncated_svd(&m, 4), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn least_squares_hand_computed() {
        let t = DenseMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let d = DenseMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let a = least_squares(&t, &d);
        assert!((a[(0, 0)] - 0.5).abs() < 1e-14);
        let eye = DenseMatrix::identity(3, 3);
        let d = random(3, 4, 5);
        assert!((least_squares(&eye, &d) - &d).norm() < 1e-13);
    }

    #[test]
    fn least_squares_rank_deficient_is_min_norm() {
        // Two identical columns: min-norm splits the weight evenly.
        let t = DenseMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let d = DenseMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        let a = least_squares(&t, &d);
        assert!((a[(0, 0)] - 1.0).abs() < 1e-12 && (a[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&DVector::from_vec(vec![0.3, 0.3, 0.4]));
        assert!((p - DVector::from_vec(vec![0.3, 0.3, 0.4])).norm() < 1e-15);
        let p = project_simplex(&DVector::from_vec(vec![2.0, 0.0]));
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        let p = project_simplex(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn capped_projection_respects_cap() {
        let v = DVector::from_vec(vec![0.9, 0.05, 0.05, 0.0]);
        let p = project_capped_simplex(&v, 0.5);
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| (-1e-15..=0.5 + 1e-12).contains(&x)));
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simplex_ls_vertex_and_midpoint() {
        let t = random(6, 3, 9);
        let d = t.columns(1, 1).into_owned();
        let a = simplex_least_squares(&t, &d).unwrap();
        assert!((a.column(0) - DVector::from_vec(vec![0.0, 1.0, 0.0])).norm() < 1e-9);

        let mid = (t.column(0) + t.column(2)) * 0.5;
        let a = simplex_least_squares(&t, &DenseMatrix::from_columns(&[mid])).unwrap();
        assert!((a.column(0) - DVector::from_vec(vec![0.5, 0.0, 0.5])).norm() < 1e-9);
    }

    #[test]
    fn simplex_ls_empty_factor_is_an_error() {
        let t = DenseMatrix::zeros(3, 0);
        assert!(simplex_least_squares(&t, &DenseMatrix::zeros(3, 1)).is_err());
    }
}
