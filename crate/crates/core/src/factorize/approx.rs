//! Approximate vertex recovery for noisy data.
//!
//! The centered data are reduced to their leading `r - 1` left singular
//! vectors, a lifting map is built on `r - 1` anchor rows of that basis and
//! every candidate code is scored by its distance to the nearest binary
//! vector. The `r` closest distinct roundings form `T`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descent::block_descent_levels;
use super::exact::select_independent;
use super::{AConstraint, Diagnostics, FactorModel};
use crate::error::{Error, Result};
use crate::linalg::{self, pivoted_qr_order};
use crate::matrix::{column_mean, BinaryMatrix, DenseMatrix};
use crate::rng::substream;
use crate::vertices::{HullMode, LiftingMap};

const MAX_ROW_COND: f64 = 1e8;
const ROW_RETRY_BUDGET: usize = 50;
const MAX_APPROX_BITS: usize = 24;
const CODE_BLOCK: u64 = 1024;
/// Residuals closer than this (relative) count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refine {
    None,
    BestFit,
    BackwardElim,
}

/// How the anchor rows of the singular basis are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowChoice {
    /// Column-pivoted QR on the transposed basis.
    Pivoted,
    /// Uniformly random rows with a bounded condition number, seeded.
    Random(u64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub r: usize,
    pub restarts: usize,
    pub refine: Refine,
    pub polish_iters: usize,
    pub levels: (f64, f64),
    pub seed: u64,
    pub a_constraint: AConstraint,
}

impl ApproxConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            restarts: 1,
            refine: Refine::BestFit,
            polish_iters: 0,
            levels: (0.0, 1.0),
            seed: 0,
            a_constraint: AConstraint::Free,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::InvalidArgument(format!("approximate recovery needs r >= 2, got {}", self.r)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.levels.0 < self.levels.1) {
            return Err(Error::InvalidArgument(format!("levels must satisfy lo < hi, got {:?}", self.levels)));
        }
        Ok(())
    }
}

/// Mean-centered data and its leading singular basis, shared by restarts.
struct Reduction {
    origin: DVector<f64>,
    basis: DenseMatrix,
}

impl Reduction {
    fn new(d: &DenseMatrix, r: usize) -> Result<Self> {
        let k = r - 1;
        if k > d.nrows().min(d.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "r - 1 = {k} exceeds min(m, n) = {}",
                d.nrows().min(d.ncols())
            )));
        }
        if k > MAX_APPROX_BITS {
            return Err(Error::CandidateOverflow {
                bits: k,
                cap: MAX_APPROX_BITS,
            });
        }
        let origin = column_mean(d);
        let mut centered = d.clone();
        for mut col in centered.column_iter_mut() {
            col -= &origin;
        }
        let basis = linalg::truncated_svd(&centered, k)?.basis;
        Ok(Self { origin, basis })
    }

    fn anchor_rows(&self, choice: RowChoice) -> Result<Vec<usize>> {
        let k = self.basis.ncols();
        match choice {
            RowChoice::Pivoted => {
                let (rows, _) = pivoted_qr_order(&self.basis.transpose(), k);
                let block = self.basis.select_rows(&rows);
                if rows.len() < k || linalg::condition_number(&block) > MAX_ROW_COND {
                    return Err(Error::DegenerateRows { attempts: 1 });
                }
                Ok(rows)
            }
            RowChoice::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = self.basis.nrows();
                for _ in 0..ROW_RETRY_BUDGET {
                    let mut rows = rand::seq::index::sample(&mut rng, m, k).into_vec();
                    rows.sort_unstable();
                    let block = self.basis.select_rows(&rows);
                    if linalg::condition_number(&block) <= MAX_ROW_COND {
                        return Ok(rows);
                    }
                }
                Err(Error::DegenerateRows {
                    attempts: ROW_RETRY_BUDGET,
                })
            }
        }
    }

    fn lifting(&self, choice: RowChoice) -> Result<LiftingMap> {
        let rows = self.anchor_rows(choice)?;
        LiftingMap::from_basis(&self.basis, rows, self.origin.clone(), HullMode::Affine)
    }
}

/// Candidate columns for a block of codes, `lo`/`hi` substituted for the
/// code bits: `Z (lo + (hi - lo) b - p_R) + p`.
fn candidate_block(lifting: &LiftingMap, levels: (f64, f64), codes: std::ops::Range<u64>) -> DenseMatrix {
    let k = lifting.bits();
    let m = lifting.nrows();
    let (lo, hi) = levels;
    let span = hi - lo;
    let ncodes = (codes.end - codes.start) as usize;
    let bits = DenseMatrix::from_fn(k, ncodes, |j, c| {
        let code = codes.start + c as u64;
        if (code >> j) & 1 == 1 {
            span
        } else {
            0.0
        }
    });
    let mut out = &lifting.z * bits;
    for i in 0..m {
        let base = lifting.offset(i) + lo * lifting.z.row(i).sum();
        for c in 0..ncodes {
            out[(i, c)] += base;
        }
    }
    for (j, &row) in lifting.anchor_rows.iter().enumerate() {
        for c in 0..ncodes {
            let code = codes.start + c as u64;
            out[(row, c)] = if (code >> j) & 1 == 1 { hi } else { lo };
        }
    }
    out
}

/// Distance from each candidate (indexed by code) to its rounding onto the
/// levels, thresholded at their midpoint.
pub fn rounding_distances(lifting: &LiftingMap, levels: (f64, f64)) -> Vec<f64> {
    let total = 1u64 << lifting.bits();
    let mid = 0.5 * (levels.0 + levels.1);
    let nblocks = total.div_ceil(CODE_BLOCK);
    (0..nblocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let start = b * CODE_BLOCK;
            let end = (start + CODE_BLOCK).min(total);
            let block = candidate_block(lifting, levels, start..end);
            (0..block.ncols())
                .map(|c| {
                    block
                        .column(c)
                        .iter()
                        .map(|&x| {
                            let target = if x > mid { levels.1 } else { levels.0 };
                            (x - target) * (x - target)
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn round_candidate(lifting: &LiftingMap, levels: (f64, f64), code: u64) -> Vec<u8> {
    let block = candidate_block(lifting, levels, code..code + 1);
    let mid = 0.5 * (levels.0 + levels.1);
    block.column(0).iter().map(|&x| u8::from(x > mid)).collect()
}

/// The `r` distinct roundings with the smallest distances, ordered by
/// `(distance, code)`.
fn top_candidates(lifting: &LiftingMap, levels: (f64, f64), r: usize) -> Result<BinaryMatrix> {
    let delta = rounding_distances(lifting, levels);
    let mut order: Vec<u64> = (0..delta.len() as u64).collect();
    order.sort_by(|&a, &b| delta[a as usize].total_cmp(&delta[b as usize]).then(a.cmp(&b)));
    let mut cols: Vec<Vec<u8>> = Vec::with_capacity(r);
    for code in order {
        let col = round_candidate(lifting, levels, code);
        if !cols.contains(&col) {
            cols.push(col);
            if cols.len() == r {
                return Ok(BinaryMatrix::from_columns(lifting.nrows(), &cols));
            }
        }
    }
    Err(Error::CandidatePoolExhausted {
        found: cols.len(),
        needed: r,
    })
}

/// Approximate vertex recovery on levels {0, 1}.
pub fn find_vertices_approximate(d: &DenseMatrix, r: usize, rows: RowChoice) -> Result<BinaryMatrix> {
    find_vertices_approximate_levels(d, r, rows, (0.0, 1.0))
}

pub(crate) fn find_vertices_approximate_levels(
    d: &DenseMatrix,
    r: usize,
    rows: RowChoice,
    levels: (f64, f64),
) -> Result<BinaryMatrix> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("approximate recovery needs r >= 2, got {r}")));
    }
    let reduction = Reduction::new(d, r)?;
    top_candidates(&reduction.lifting(rows)?, levels, r)
}

fn fit_residual(d: &DenseMatrix, t: &DenseMatrix) -> f64 {
    (d - t * linalg::least_squares(t, d)).norm()
}

/// Greedy backward elimination: repeatedly drops the column whose removal
/// increases the least-squares residual the least, until `r` remain. Ties
/// drop the later column.
///
/// Columns in the span of earlier ones cost nothing to drop and go first,
/// latest first. On the remaining independent set, the residual increase of
/// dropping column `j` is `||X_j||^2 / M_jj` with `M = (T'T)^{-1}` and
/// `X = M T'D`; both are downdated after each removal.
pub fn backward_eliminate(d: &DenseMatrix, pool: &[Vec<u8>], r: usize, levels: (f64, f64)) -> Vec<Vec<u8>> {
    let m = d.nrows();
    if pool.len() <= r {
        return pool.to_vec();
    }
    let vectors: Vec<DVector<f64>> = pool
        .iter()
        .map(|c| DVector::from_iterator(m, c.iter().map(|&b| if b == 1 { levels.1 } else { levels.0 })))
        .collect();
    let independent = select_independent(&vectors, pool.len());
    let mut alive: Vec<usize> = (0..pool.len()).collect();
    for j in (0..pool.len()).rev() {
        if alive.len() <= r {
            break;
        }
        if independent.binary_search(&j).is_err() {
            alive.retain(|&i| i != j);
        }
    }
    if alive.len() > r {
        let t = DenseMatrix::from_fn(m, alive.len(), |i, k| vectors[alive[k]][i]);
        let gram = t.transpose() * &t;
        let Some(chol) = gram.cholesky() else {
            return backward_eliminate_direct(d, pool, &alive, r, levels);
        };
        let mut inv = chol.inverse();
        let mut coef = &inv * (t.transpose() * d);
        let scale = d.norm_squared();
        while alive.len() > r {
            let costs: Vec<f64> = (0..alive.len())
                .map(|k| coef.row(k).norm_squared() / inv[(k, k)])
                .collect();
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let tie = min + TIE_TOL * (min + scale);
            let k = costs.iter().rposition(|&c| c <= tie).expect("nonempty pool");
            let pivot = inv[(k, k)];
            let col = inv.column(k).into_owned();
            let row_k = coef.row(k).into_owned();
            inv -= &col * col.transpose() / pivot;
            coef -= &col * row_k / pivot;
            inv = inv.remove_row(k).remove_column(k);
            coef = coef.remove_row(k);
            alive.remove(k);
        }
    }
    alive.into_iter().map(|i| pool[i].clone()).collect()
}

/// Fallback refitting every reduced set from scratch.
fn backward_eliminate_direct(
    d: &DenseMatrix,
    pool: &[Vec<u8>],
    alive: &[usize],
    r: usize,
    levels: (f64, f64),
) -> Vec<Vec<u8>> {
    let m = d.nrows();
    let mut current: Vec<usize> = alive.to_vec();
    let scale = d.norm_squared();
    while current.len() > r {
        let fits: Vec<f64> = (0..current.len())
            .into_par_iter()
            .map(|drop| {
                let cols: Vec<Vec<u8>> = current
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != drop)
                    .map(|(_, &i)| pool[i].clone())
                    .collect();
                let t = BinaryMatrix::from_columns(m, &cols).to_levels(levels.0, levels.1);
                fit_residual(d, &t).powi(2)
            })
            .collect();
        let min = fits.iter().copied().fold(f64::INFINITY, f64::min);
        let tie = min + TIE_TOL * (min + scale);
        let drop = fits.iter().rposition(|&f| f <= tie).expect("nonempty pool");
        current.remove(drop);
    }
    current.into_iter().map(|i| pool[i].clone()).collect()
}

/// Approximate factorization with optional restarts, refinement, block
/// descent polish and shifted binary levels.
pub fn factorize_approximate(d: &DenseMatrix, cfg: &ApproxConfig) -> Result<FactorModel> {
    cfg.validate()?;
    let reduction = Reduction::new(d, cfg.r)?;
    let restarts = match cfg.refine {
        Refine::None => 1,
        _ => cfg.restarts,
    };
    let candidates: Vec<BinaryMatrix> = (0..restarts)
        .into_par_iter()
        .map(|l| {
            let choice = if l == 0 {
                RowChoice::Pivoted
            } else {
                RowChoice::Random(substream(cfg.seed, l as u64))
            };
            top_candidates(&reduction.lifting(choice)?, cfg.levels, cfg.r)
        })
        .collect::<Result<_>>()?;

    let (lo, hi) = cfg.levels;
    let mut pool_size = None;
    let t = match cfg.refine {
        Refine::None => candidates.into_iter().next().expect("one restart"),
        Refine::BestFit => {
            let fits: Vec<f64> = candidates
                .par_iter()
                .map(|t| fit_residual(d, &t.to_levels(lo, hi)))
                .collect();
            let mut best = 0;
            for (i, &f) in fits.iter().enumerate() {
                if f < fits[best] {
                    best = i;
                }
            }
            candidates.into_iter().nth(best).expect("index in range")
        }
        Refine::BackwardElim => {
            let mut pool: Vec<Vec<u8>> = candidates
                .iter()
                .flat_map(|t| t.columns().map(<[u8]>::to_vec))
                .collect();
            pool.sort();
            pool.dedup();
            pool_size = Some(pool.len());
            BinaryMatrix::from_columns(d.nrows(), &backward_eliminate(d, &pool, cfg.r, cfg.levels))
        }
    };

    let (t, iterations) = if cfg.polish_iters > 0 {
        let (model, trace) = block_descent_levels(d, &t, cfg.polish_iters, cfg.levels);
        (model.t, trace.iterations)
    } else {
        (t, 0)
    };
    let a = cfg.a_constraint.fit(&t.to_levels(lo, hi), d)?;
    let diagnostics = Diagnostics {
        vertex_count: None,
        restarts_used: restarts,
        iterations,
        candidate_pool: pool_size,
        subsets_checked: None,
    };
    Ok(FactorModel::new(d, t, a, None, cfg.a_constraint, cfg.levels, diagnostics))
}
