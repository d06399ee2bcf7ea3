use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{AConstraint, Diagnostics, FactorModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{BinaryMatrix, DenseMatrix};
use crate::vertices::{self, HullMode, VertexOptions, VertexSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactMode {
    /// Columns of `A` sum to one.
    Affine,
    /// Unconstrained `A`.
    Linear,
    /// Columns of `A` on the probability simplex.
    Simplex,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactOptions {
    pub vertex: VertexOptions,
    /// Accepted residual relative to `||D||_F`.
    pub residual_tol: f64,
    /// Maximum number of `r`-subsets examined when the simplex mode finds
    /// more than `r` vertices.
    pub subset_budget: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            vertex: VertexOptions::default(),
            residual_tol: 1e-6,
            subset_budget: 1000,
        }
    }
}

/// Greedily picks up to `r` linearly independent vectors in the given order.
///
/// Modified Gram-Schmidt with one reorthogonalization pass; a vector is
/// accepted when its component outside the span so far keeps more than
/// `1e-6` of its norm.
pub fn select_independent(vectors: &[DVector<f64>], r: usize) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut chosen = Vec::with_capacity(r);
    for (idx, v) in vectors.iter().enumerate() {
        if chosen.len() == r {
            break;
        }
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let rest = w.norm();
        if rest > 1e-6 * norm {
            basis.push(w / rest);
            chosen.push(idx);
        }
    }
    chosen
}

fn lifted(vertex: &[u8], affine: bool) -> DVector<f64> {
    let head = usize::from(affine);
    let mut v = DVector::zeros(vertex.len() + head);
    if affine {
        v[0] = 1.0;
    }
    for (i, &b) in vertex.iter().enumerate() {
        v[i + head] = f64::from(b);
    }
    v
}

fn pick_columns(set: &VertexSet, r: usize, affine: bool) -> Option<Vec<Vec<u8>>> {
    let lifted: Vec<DVector<f64>> = set.vertices.iter().map(|v| lifted(v, affine)).collect();
    let chosen = select_independent(&lifted, r);
    (chosen.len() == r).then(|| chosen.iter().map(|&i| set.vertices[i].clone()).collect())
}

/// Lexicographic `r`-subsets of `0..q`, at most `limit` of them.
fn subsets(q: usize, r: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > q {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        if out.len() == limit {
            return out;
        }
        let Some(i) = (0..r).rev().find(|&i| idx[i] < q - r + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn simplex_subset_search(d: &DenseMatrix, set: &VertexSet, r: usize, opts: &ExactOptions) -> Result<(BinaryMatrix, DenseMatrix, usize)> {
    let m = d.nrows();
    let scale = d.norm().max(f64::MIN_POSITIVE);
    let mut scored: Vec<(f64, Vec<usize>)> = subsets(set.len(), r, opts.subset_budget)
        .into_iter()
        .map(|s| {
            let cols: Vec<Vec<u8>> = s.iter().map(|&i| set.vertices[i].clone()).collect();
            let t = BinaryMatrix::from_columns(m, &cols).to_dense();
            let a = linalg::affine_least_squares(&t, d);
            ((d - &t * a).norm(), s)
        })
        .collect();
    let checked = scored.len();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    for (fit, s) in scored {
        if fit > opts.residual_tol * scale {
            break;
        }
        let cols: Vec<Vec<u8>> = s.iter().map(|&i| set.vertices[i].clone()).collect();
        let t = BinaryMatrix::from_columns(m, &cols);
        let a = match linalg::simplex_least_squares(&t.to_dense(), d) {
            Ok(a) => a,
            Err(_) => continue,
        };
        if (d - t.to_dense() * &a).norm() <= opts.residual_tol * scale {
            return Ok((t, a, checked));
        }
    }
    Err(Error::AmbiguousSelection {
        vertices: set.len(),
        rank: r,
        budget: opts.subset_budget,
    })
}

/// Exact factorization `D = T A` with `T` binary.
///
/// Vertices of the hull are enumerated, `r` independent ones are taken in
/// ascending code order and `A` is solved for. In simplex mode with more
/// than `r` vertices, `r`-subsets are ranked by affine fit and checked with
/// simplex least squares until one reproduces `D`.
pub fn factorize_exact(d: &DenseMatrix, mode: ExactMode, opts: &ExactOptions) -> Result<FactorModel> {
    let hull = match mode {
        ExactMode::Affine | ExactMode::Simplex => HullMode::Affine,
        ExactMode::Linear => HullMode::Span,
    };
    let (lifting, set) = vertices::find_with_lifting(d, hull, &opts.vertex)?;
    let r = lifting.rank();
    let m = d.nrows();
    let scale = d.norm();
    let mut diagnostics = Diagnostics {
        vertex_count: Some(set.len()),
        ..Default::default()
    };

    let (t, a, constraint) = match mode {
        ExactMode::Simplex if set.len() > r => {
            let (t, a, checked) = simplex_subset_search(d, &set, r, opts)?;
            diagnostics.subsets_checked = Some(checked);
            (t, a, AConstraint::Simplex)
        }
        _ => {
            let cols = pick_columns(&set, r, hull == HullMode::Affine).ok_or(Error::NoExactFactorization {
                relative_residual: f64::INFINITY,
            })?;
            let t = BinaryMatrix::from_columns(m, &cols);
            let constraint = match mode {
                ExactMode::Affine => AConstraint::Affine,
                ExactMode::Linear => AConstraint::Free,
                ExactMode::Simplex => AConstraint::Simplex,
            };
            let a = constraint.fit(&t.to_dense(), d)?;
            (t, a, constraint)
        }
    };
    let model = FactorModel::new(d, t, a, None, constraint, (0.0, 1.0), diagnostics);
    if model.residual_fro > opts.residual_tol * scale {
        return Err(Error::NoExactFactorization {
            relative_residual: model.residual_fro / scale,
        });
    }
    Ok(model)
}

/// Exact three-way factorization `D = T W A'` with `T`, `A` binary.
///
/// The returned model stores `A'` (an `r x n` matrix of 0/1 values) in `a`
/// and the real middle factor in `w`.
pub fn factorize_three_way(d: &DenseMatrix, r: Option<usize>, opts: &ExactOptions) -> Result<FactorModel> {
    let vopts = VertexOptions {
        rank: r,
        ..opts.vertex.clone()
    };
    let (left_map, left) = vertices::find_with_lifting(d, HullMode::Span, &vopts)?;
    let rank = left_map.rank();
    let vopts = VertexOptions {
        rank: Some(rank),
        ..vopts
    };
    let dt = d.transpose();
    let right = vertices::find_vertices_span(&dt, &vopts)?;
    let no_fit = || Error::NoExactFactorization {
        relative_residual: f64::INFINITY,
    };
    let t = BinaryMatrix::from_columns(d.nrows(), &pick_columns(&left, rank, false).ok_or_else(no_fit)?);
    let a = BinaryMatrix::from_columns(d.ncols(), &pick_columns(&right, rank, false).ok_or_else(no_fit)?);

    let t_dense = t.to_dense();
    let a_dense = a.to_dense();
    // W = T^+ D (A^+)'.
    let x = linalg::least_squares(&t_dense, d);
    let w = linalg::least_squares(&a_dense, &x.transpose()).transpose();
    let diagnostics = Diagnostics {
        vertex_count: Some(left.len()),
        ..Default::default()
    };
    let model = FactorModel::new(d, t, a_dense.transpose(), Some(w), AConstraint::Free, (0.0, 1.0), diagnostics);
    let scale = d.norm();
    if model.residual_fro > opts.residual_tol * scale {
        return Err(Error::NoExactFactorization {
            relative_residual: model.residual_fro / scale,
        });
    }
    Ok(model)
}
