//! Enumeration of the hypercube vertices contained in the affine hull or the
//! linear span of the data columns.
//!
//! Every vertex of `[0,1]^m` in the hull is the image of a binary word on a
//! set of anchor rows under a lifting map `b -> Z (b - p_R) + p`, so at most
//! `2^k` candidates have to be examined, `k` being the hull dimension. The
//! anchor rows reproduce the code bits exactly and are never checked.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilp::{self, BoxFeasibilityProblem};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::matrix::{column_mean, BinaryMatrix, DenseMatrix};

pub const DEFAULT_TOL_BINARY: f64 = 1e-8;
pub const DEFAULT_MAX_BITS: usize = 30;

/// Slack for the Gray-code prefilter, whose running sums drift slightly from
/// the directly evaluated coordinates. Survivors are always rechecked.
const PREFILTER_SLACK: f64 = 1e-9;
const GRAY_CHUNK_BITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HullMode {
    Affine,
    Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pruning {
    /// Materialize every candidate column and check all rows.
    Full,
    /// Check one row at a time, discarding candidates as soon as a
    /// coordinate is off {0, 1}.
    Incremental,
    /// Generate the candidate pool with the box-feasibility branch and bound
    /// over all non-anchor rows, then verify it.
    Ilp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexOptions {
    /// Hull rank `r` (the number of components). `None` infers it.
    pub rank: Option<usize>,
    pub tol_binary: f64,
    pub pruning: Pruning,
    pub max_bits: usize,
    pub rank_tol: f64,
}

impl Default for VertexOptions {
    fn default() -> Self {
        Self {
            rank: None,
            tol_binary: DEFAULT_TOL_BINARY,
            pruning: Pruning::Incremental,
            max_bits: DEFAULT_MAX_BITS,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// The map `b -> Z (b - p_R) + p` from anchor-row codes to candidate columns.
#[derive(Clone, Debug)]
pub struct LiftingMap {
    /// `m x k`, identity on the anchor rows.
    pub z: DenseMatrix,
    pub origin: DVector<f64>,
    pub anchor_rows: Vec<usize>,
    pub mode: HullMode,
    /// `p_i - Z_i p_R`, the value of coordinate `i` for the all-zero code.
    offsets: DVector<f64>,
    /// `anchor_pos[i] = Some(j)` if row `i` is anchor `j`.
    anchor_pos: Vec<Option<usize>>,
}

impl LiftingMap {
    /// Builds `Z = basis (basis_R)^{-1}` for a basis of the direction space
    /// and anchor rows `R` on which the basis block is invertible.
    pub fn from_basis(
        basis: &DenseMatrix,
        anchor_rows: Vec<usize>,
        origin: DVector<f64>,
        mode: HullMode,
    ) -> Result<Self> {
        let m = basis.nrows();
        let k = basis.ncols();
        if anchor_rows.len() != k || origin.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "basis {m}x{k}, {} anchor rows, origin of length {}",
                anchor_rows.len(),
                origin.len()
            )));
        }
        let mut z = if k == 0 {
            DenseMatrix::zeros(m, 0)
        } else {
            let block = basis.select_rows(&anchor_rows);
            let zt = block
                .transpose()
                .full_piv_lu()
                .solve(&basis.transpose())
                .ok_or(Error::RankDeficient {
                    requested: k,
                    numerical: k - 1,
                })?;
            zt.transpose()
        };
        let mut anchor_pos = vec![None; m];
        for (j, &row) in anchor_rows.iter().enumerate() {
            anchor_pos[row] = Some(j);
            for c in 0..k {
                z[(row, c)] = if c == j { 1.0 } else { 0.0 };
            }
        }
        let origin_r = DVector::from_iterator(k, anchor_rows.iter().map(|&i| origin[i]));
        let offsets = &origin - &z * origin_r;
        Ok(Self {
            z,
            origin,
            anchor_rows,
            mode,
            offsets,
            anchor_pos,
        })
    }

    /// Lifting map of the affine hull (`Affine`) or span (`Span`) of the
    /// columns of `d`. Returns the map together with the detected dimension.
    pub fn from_data(d: &DenseMatrix, mode: HullMode, rank_tol: f64) -> Result<Self> {
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::InvalidArgument("empty data matrix".into()));
        }
        let (centered, origin) = match mode {
            HullMode::Affine => {
                let p = column_mean(d);
                let mut centered = d.clone();
                for mut col in centered.column_iter_mut() {
                    col -= &p;
                }
                (centered, p)
            }
            HullMode::Span => (d.clone(), DVector::zeros(d.nrows())),
        };
        let sel = linalg::select_pivots(&centered, None, rank_tol)?;
        let basis = centered.select_columns(&sel.column_indices);
        Self::from_basis(&basis, sel.row_indices, origin, mode)
    }

    /// Number of code bits `k`.
    pub fn bits(&self) -> usize {
        self.z.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.z.nrows()
    }

    /// Rank of the factorization implied by this map.
    pub fn rank(&self) -> usize {
        match self.mode {
            HullMode::Affine => self.bits() + 1,
            HullMode::Span => self.bits(),
        }
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchor_pos[i].is_some()
    }

    pub fn non_anchor_rows(&self) -> Vec<usize> {
        (0..self.nrows()).filter(|&i| !self.is_anchor(i)).collect()
    }

    /// `p_i - Z_i p_R`.
    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    /// Coordinate `i` of the candidate for `code`, evaluated directly.
    pub fn coordinate(&self, i: usize, code: u64) -> f64 {
        if let Some(j) = self.anchor_pos[i] {
            return ((code >> j) & 1) as f64;
        }
        let mut v = self.offsets[i];
        for j in 0..self.bits() {
            if (code >> j) & 1 == 1 {
                v += self.z[(i, j)];
            }
        }
        v
    }

    /// Full candidate column for `code`.
    pub fn candidate(&self, code: u64) -> DVector<f64> {
        DVector::from_iterator(self.nrows(), (0..self.nrows()).map(|i| self.coordinate(i, code)))
    }

    /// Default incremental schedule: non-anchor rows by descending number of
    /// nonzero weights, ties by row index.
    pub fn row_schedule(&self) -> Vec<usize> {
        let mut rows = self.non_anchor_rows();
        let nnz = |i: usize| (0..self.bits()).filter(|&j| self.z[(i, j)].abs() > 1e-12).count();
        rows.sort_by_key(|&i| (std::cmp::Reverse(nnz(i)), i));
        rows
    }
}

/// Surviving candidate codes together with the rows already checked.
#[derive(Clone, Debug)]
pub struct CandidateBatch {
    pub lifting: LiftingMap,
    pub codes: Vec<u64>,
    pub checked_rows: Vec<usize>,
}

impl CandidateBatch {
    /// All `2^k` codes, nothing checked.
    pub fn full(lifting: LiftingMap) -> Self {
        let codes = (0..1u64 << lifting.bits()).collect();
        Self {
            lifting,
            codes,
            checked_rows: Vec::new(),
        }
    }
}

/// Binary vectors in the hull, sorted by code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    pub vertices: Vec<Vec<u8>>,
    pub codes: Vec<u64>,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vertices as the columns of a binary matrix.
    pub fn to_matrix(&self, nrows: usize) -> BinaryMatrix {
        BinaryMatrix::from_columns(nrows, &self.vertices)
    }
}

#[inline]
fn near_binary(x: f64, tol: f64) -> bool {
    x.abs() <= tol || (x - 1.0).abs() <= tol
}

#[inline]
fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// Keeps the codes whose coordinates on `row_order` are all within `tol` of
/// {0, 1}.
pub fn filter_candidates_incremental(batch: CandidateBatch, row_order: &[usize], tol: f64) -> CandidateBatch {
    let CandidateBatch {
        lifting,
        mut codes,
        mut checked_rows,
    } = batch;
    for &i in row_order {
        if codes.is_empty() {
            checked_rows.push(i);
            continue;
        }
        codes.retain(|&c| near_binary(lifting.coordinate(i, c), tol));
        checked_rows.push(i);
    }
    CandidateBatch {
        lifting,
        codes,
        checked_rows,
    }
}

/// Gray-code scan of all codes over the given rows, maintaining the running
/// coordinate sums. Parallel over chunks of the code sequence.
fn gray_scan(lifting: &LiftingMap, rows: &[usize], tol: f64) -> Vec<u64> {
    let k = lifting.bits();
    let total = 1u64 << k;
    let chunk_bits = GRAY_CHUNK_BITS.min(k);
    let chunk = 1u64 << chunk_bits;
    let nchunks = total / chunk;
    let weights: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| (0..k).map(|j| lifting.z[(i, j)]).collect())
        .collect();

    let mut out: Vec<u64> = (0..nchunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let start = c * chunk;
            let mut code = gray(start);
            let mut vals: Vec<f64> = rows.iter().map(|&i| lifting.coordinate(i, code)).collect();
            let mut found = Vec::new();
            for idx in start..start + chunk {
                if idx > start {
                    let next = gray(idx);
                    let bit = (next ^ code).trailing_zeros() as usize;
                    let sign = if next & (1 << bit) != 0 { 1.0 } else { -1.0 };
                    for (v, w) in vals.iter_mut().zip(&weights) {
                        *v += sign * w[bit];
                    }
                    code = next;
                }
                if vals.iter().all(|&v| near_binary(v, tol)) {
                    found.push(code);
                }
            }
            found
        })
        .collect();
    out.sort_unstable();
    out
}

/// Enumerates the vertices reachable through `lifting`.
pub fn enumerate_vertices(lifting: &LiftingMap, tol: f64, pruning: Pruning) -> VertexSet {
    let schedule = lifting.row_schedule();
    let codes = if schedule.is_empty() {
        (0..1u64 << lifting.bits()).collect()
    } else {
        let pool = match pruning {
            Pruning::Full => gray_scan(lifting, &schedule, tol + PREFILTER_SLACK),
            Pruning::Incremental => gray_scan(lifting, &schedule[..1], tol + PREFILTER_SLACK),
            Pruning::Ilp => ilp_pool(lifting, tol)
                .unwrap_or_else(|| gray_scan(lifting, &schedule[..1], tol + PREFILTER_SLACK)),
        };
        let batch = CandidateBatch {
            lifting: lifting.clone(),
            codes: pool,
            checked_rows: Vec::new(),
        };
        filter_candidates_incremental(batch, &schedule, tol).codes
    };
    let mut codes = codes;
    codes.sort_unstable();
    codes.dedup();
    let vertices = codes
        .iter()
        .map(|&c| {
            (0..lifting.nrows())
                .map(|i| u8::from(lifting.coordinate(i, c) > 0.5))
                .collect()
        })
        .collect();
    VertexSet { vertices, codes }
}

/// Candidate pool from the box-feasibility search; `None` if the pool was
/// truncated.
fn ilp_pool(lifting: &LiftingMap, tol: f64) -> Option<Vec<u64>> {
    if lifting.bits() == 0 {
        return Some(vec![0]);
    }
    let problem = BoxFeasibilityProblem::from_lifting(lifting);
    let pool = ilp::solve_box_feasibility(&problem, ilp::DEFAULT_FEAS_TOL.max(tol), ilp::DEFAULT_MAX_POOL).ok()?;
    (!pool.truncated).then_some(pool.codes)
}

fn build_lifting(d: &DenseMatrix, mode: HullMode, opts: &VertexOptions) -> Result<LiftingMap> {
    let lifting = LiftingMap::from_data(d, mode, opts.rank_tol)?;
    if let Some(r) = opts.rank {
        if r != lifting.rank() {
            let expected = match mode {
                HullMode::Affine => r.saturating_sub(1),
                HullMode::Span => r,
            };
            return Err(Error::RankMismatch {
                expected,
                detected: lifting.bits(),
            });
        }
    }
    if lifting.bits() > opts.max_bits {
        return Err(Error::CandidateOverflow {
            bits: lifting.bits(),
            cap: opts.max_bits,
        });
    }
    Ok(lifting)
}

/// `{0,1}^m ∩ aff(D)`.
pub fn find_vertices_affine(d: &DenseMatrix, opts: &VertexOptions) -> Result<VertexSet> {
    let lifting = build_lifting(d, HullMode::Affine, opts)?;
    Ok(enumerate_vertices(&lifting, opts.tol_binary, opts.pruning))
}

/// `{0,1}^m ∩ span(D)`, always containing the zero vector.
pub fn find_vertices_span(d: &DenseMatrix, opts: &VertexOptions) -> Result<VertexSet> {
    let lifting = build_lifting(d, HullMode::Span, opts)?;
    Ok(enumerate_vertices(&lifting, opts.tol_binary, opts.pruning))
}

pub fn find_vertices(d: &DenseMatrix, mode: HullMode, opts: &VertexOptions) -> Result<VertexSet> {
    match mode {
        HullMode::Affine => find_vertices_affine(d, opts),
        HullMode::Span => find_vertices_span(d, opts),
    }
}

/// Lifting map together with its vertex set, for callers that need both.
pub(crate) fn find_with_lifting(
    d: &DenseMatrix,
    mode: HullMode,
    opts: &VertexOptions,
) -> Result<(LiftingMap, VertexSet)> {
    let lifting = build_lifting(d, mode, opts)?;
    let set = enumerate_vertices(&lifting, opts.tol_binary, opts.pruning);
    Ok((lifting, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: usize, cols: usize, row_major: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, row_major)
    }

    /// Lifting map with explicit Z rows, zero origin and anchors 0..k.
    fn lifting_with_row(k: usize, row: &[f64], offset_p: f64) -> LiftingMap {
        let m = k + 1;
        let mut basis = DenseMatrix::zeros(m, k);
        for j in 0..k {
            basis[(j, j)] = 1.0;
            basis[(k, j)] = row[j];
        }
        let mut origin = DVector::zeros(m);
        origin[k] = offset_p;
        LiftingMap::from_basis(&basis, (0..k).collect(), origin, HullMode::Affine).unwrap()
    }

    #[test]
    fn line_through_two_points() {
        let d = dm(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let set = find_vertices_affine(&d, &VertexOptions::default()).unwrap();
        assert_eq!(set.len(), 2);
        let mut v = set.vertices.clone();
        v.sort();
        assert_eq!(v, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn span_of_unit_vector() {
        let d = dm(2, 1, &[1.0, 0.0]);
        let set = find_vertices_span(&d, &VertexOptions::default()).unwrap();
        assert_eq!(set.vertices, vec![vec![0, 0], vec![1, 0]]);
        let full = find_vertices_span(&DenseMatrix::identity(2, 2), &VertexOptions::default()).unwrap();
        assert_eq!(full.len(), 4);
    }

    #[test]
    fn constant_rows() {
        let l = lifting_with_row(3, &[0.0, 0.0, 0.0], 0.5);
        let out = filter_candidates_incremental(CandidateBatch::full(l), &[3], 1e-8);
        assert!(out.codes.is_empty());
        let l = lifting_with_row(3, &[0.0, 0.0, 0.0], 0.0);
        let out = filter_candidates_incremental(CandidateBatch::full(l), &[3], 1e-8);
        assert_eq!(out.codes.len(), 8);
        assert_eq!(out.checked_rows, vec![3]);
    }

    #[test]
    fn two_bit_sum_row() {
        let l = lifting_with_row(2, &[1.0, 1.0], 0.0);
        let out = filter_candidates_incremental(CandidateBatch::full(l), &[2], 0.0);
        assert_eq!(out.codes, vec![0b00, 0b01, 0b10]);
        assert!(out.codes.len() <= 4);
    }

    #[test]
    fn rank_mismatch_and_overflow() {
        let d = dm(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let opts = VertexOptions {
            rank: Some(3),
            ..Default::default()
        };
        assert!(matches!(
            find_vertices_affine(&d, &opts),
            Err(Error::RankMismatch { expected: 2, detected: 1 })
        ));
        let opts = VertexOptions {
            max_bits: 0,
            ..Default::default()
        };
        assert!(matches!(find_vertices_affine(&d, &opts), Err(Error::CandidateOverflow { .. })));
    }

    #[test]
    fn single_point_hull() {
        let d = dm(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let set = find_vertices_affine(&d, &VertexOptions::default()).unwrap();
        assert_eq!(set.vertices, vec![vec![1, 0, 1]]);
        let d = dm(2, 1, &[0.5, 1.0]);
        assert!(find_vertices_affine(&d, &VertexOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn pruning_strategies_agree() {
        // Face of the 4-cube: every code is a vertex.
        let d = dm(4, 3, &[0.0, 0.0, 0.0, 0.2, 0.3, 0.6, 0.3, 0.6, 0.1, 0.0, 0.0, 0.0]);
        for pruning in [Pruning::Full, Pruning::Incremental, Pruning::Ilp] {
            let opts = VertexOptions {
                pruning,
                ..Default::default()
            };
            let set = find_vertices_affine(&d, &opts).unwrap();
            assert_eq!(set.len(), 4, "{pruning:?}");
        }
    }

    #[test]
    fn anchor_rows_are_identity() {
        let d = dm(4, 3, &[0.1, 0.7, 0.2, 0.9, 0.3, 0.0, 0.4, 0.4, 1.0, 0.0, 0.5, 0.5]);
        let l = LiftingMap::from_data(&d, HullMode::Affine, DEFAULT_RANK_TOL).unwrap();
        for (j, &row) in l.anchor_rows.iter().enumerate() {
            for c in 0..l.bits() {
                assert_eq!(l.z[(row, c)], if c == j { 1.0 } else { 0.0 });
            }
        }
    }
}
