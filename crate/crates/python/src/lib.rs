//! Python bindings. Matrices cross the boundary as lists of rows.

use bincomp::experiments::{self, ExperimentConfig, Setup};
use bincomp::{
    AConstraint, ApproxConfig, BinaryMatrix, DenseMatrix, ExactMode, ExactOptions, HullMode, Pruning, Refine,
    VertexOptions,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: bincomp::Error) -> PyErr {
    if e.is_algorithmic() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn dense(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let n = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("row {i} has {} entries, expected {n}", rows[i].len())));
    }
    Ok(DenseMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn binary(rows: Vec<Vec<u8>>) -> PyResult<BinaryMatrix> {
    let d = dense(rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())?;
    if d.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(PyValueError::new_err("binary matrix entries must be 0 or 1"));
    }
    Ok(BinaryMatrix::from_dense_threshold(&d, 0.5))
}

fn dense_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Binary rows as `u32` so Python sees lists of ints rather than `bytes`.
fn binary_rows(t: &BinaryMatrix) -> Vec<Vec<u32>> {
    (0..t.nrows()).map(|i| (0..t.ncols()).map(|k| u32::from(t.get(i, k))).collect()).collect()
}

fn bad(kind: &str, value: &str) -> PyErr {
    PyValueError::new_err(format!("unknown {kind} '{value}'"))
}

fn hull_mode(s: &str) -> PyResult<HullMode> {
    match s {
        "affine" => Ok(HullMode::Affine),
        "span" => Ok(HullMode::Span),
        _ => Err(bad("mode", s)),
    }
}

fn pruning(s: &str) -> PyResult<Pruning> {
    match s {
        "full" => Ok(Pruning::Full),
        "incremental" => Ok(Pruning::Incremental),
        "ilp" => Ok(Pruning::Ilp),
        _ => Err(bad("pruning", s)),
    }
}

fn exact_mode(s: &str) -> PyResult<ExactMode> {
    match s {
        "affine" => Ok(ExactMode::Affine),
        "linear" => Ok(ExactMode::Linear),
        "simplex" => Ok(ExactMode::Simplex),
        _ => Err(bad("mode", s)),
    }
}

fn refine(s: &str) -> PyResult<Refine> {
    match s {
        "none" => Ok(Refine::None),
        "best-fit" => Ok(Refine::BestFit),
        "backward-elim" => Ok(Refine::BackwardElim),
        _ => Err(bad("refine", s)),
    }
}

fn a_constraint(s: &str) -> PyResult<AConstraint> {
    match s {
        "free" => Ok(AConstraint::Free),
        "affine" => Ok(AConstraint::Affine),
        "simplex" => Ok(AConstraint::Simplex),
        _ => Err(bad("a_constraint", s)),
    }
}

/// A fitted model `D ≈ T A` (or `T W A` for the three-way model).
#[pyclass(frozen, name = "FactorModel")]
struct PyFactorModel {
    inner: bincomp::FactorModel,
}

#[pymethods]
impl PyFactorModel {
    #[getter]
    fn t(&self) -> Vec<Vec<u32>> {
        binary_rows(&self.inner.t)
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        dense_rows(&self.inner.a)
    }

    #[getter]
    fn w(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.w.as_ref().map(dense_rows)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn levels(&self) -> (f64, f64) {
        self.inner.levels
    }

    #[getter]
    fn residual_fro(&self) -> f64 {
        self.inner.residual_fro
    }

    fn reconstruct(&self) -> Vec<Vec<f64>> {
        dense_rows(&self.inner.reconstruct())
    }

    fn __repr__(&self) -> String {
        format!(
            "FactorModel(rank={}, shape=({}, {}), residual_fro={:e})",
            self.inner.rank(),
            self.inner.t.nrows(),
            self.inner.a.ncols(),
            self.inner.residual_fro
        )
    }
}

/// Binary vectors in the affine hull or span of the columns of `d`,
/// returned as a list of 0/1 lists.
#[pyfunction]
#[pyo3(signature = (d, mode="affine", pruning_kind="incremental", rank=None))]
fn find_vertices(d: Vec<Vec<f64>>, mode: &str, pruning_kind: &str, rank: Option<usize>) -> PyResult<Vec<Vec<u32>>> {
    let d = dense(d)?;
    let opts = VertexOptions {
        rank,
        pruning: pruning(pruning_kind)?,
        ..VertexOptions::default()
    };
    let set = bincomp::find_vertices(&d, hull_mode(mode)?, &opts).map_err(to_py_err)?;
    Ok(set.vertices.iter().map(|v| v.iter().map(|&b| u32::from(b)).collect()).collect())
}

#[pyfunction]
#[pyo3(signature = (d, mode="affine", rank=None))]
fn factorize_exact(d: Vec<Vec<f64>>, mode: &str, rank: Option<usize>) -> PyResult<PyFactorModel> {
    let d = dense(d)?;
    let mut opts = ExactOptions::default();
    opts.vertex.rank = rank;
    let inner = bincomp::factorize_exact(&d, exact_mode(mode)?, &opts).map_err(to_py_err)?;
    Ok(PyFactorModel { inner })
}

#[pyfunction]
#[pyo3(signature = (d, rank=None))]
fn factorize_three_way(d: Vec<Vec<f64>>, rank: Option<usize>) -> PyResult<PyFactorModel> {
    let d = dense(d)?;
    let inner = bincomp::factorize_three_way(&d, rank, &ExactOptions::default()).map_err(to_py_err)?;
    Ok(PyFactorModel { inner })
}

#[pyfunction]
#[pyo3(signature = (d, rank, restarts=1, refine_kind="best-fit", polish_iters=0, levels=(0.0, 1.0), constraint="free", seed=0))]
#[allow(clippy::too_many_arguments)]
fn factorize_approximate(
    py: Python<'_>,
    d: Vec<Vec<f64>>,
    rank: usize,
    restarts: usize,
    refine_kind: &str,
    polish_iters: usize,
    levels: (f64, f64),
    constraint: &str,
    seed: u64,
) -> PyResult<PyFactorModel> {
    let d = dense(d)?;
    let cfg = ApproxConfig {
        r: rank,
        restarts,
        refine: refine(refine_kind)?,
        polish_iters,
        levels,
        seed,
        a_constraint: a_constraint(constraint)?,
    };
    let inner = py.detach(|| bincomp::factorize_approximate(&d, &cfg)).map_err(to_py_err)?;
    Ok(PyFactorModel { inner })
}

/// Alternating least squares for `A` and exhaustive row search for `T`.
#[pyfunction]
#[pyo3(signature = (d, t0, max_iter=100))]
fn block_descent(d: Vec<Vec<f64>>, t0: Vec<Vec<u8>>, max_iter: usize) -> PyResult<PyFactorModel> {
    let d = dense(d)?;
    let t0 = binary(t0)?;
    if t0.nrows() != d.nrows() {
        return Err(PyValueError::new_err("t0 and d must have the same number of rows"));
    }
    Ok(PyFactorModel {
        inner: bincomp::block_descent(&d, &t0, max_iter),
    })
}

/// Row-wise optimal binary `T` for fixed `A`.
#[pyfunction]
fn update_t_rows(d: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<u32>>> {
    let (d, a) = (dense(d)?, dense(a)?);
    if d.ncols() != a.ncols() {
        return Err(PyValueError::new_err("d and a must have the same number of columns"));
    }
    Ok(binary_rows(&bincomp::update_t_rows(&d, &a)))
}

/// Synthetic data `(D, T*, A*)` for one trial of a named setup.
#[pyfunction]
#[pyo3(signature = (setup="T05", m=1000, r=10, n=None, alpha=0.0, seed=0, trial=0))]
#[allow(clippy::type_complexity)]
fn gen_synthetic(
    setup: &str,
    m: usize,
    r: usize,
    n: Option<usize>,
    alpha: f64,
    seed: u64,
    trial: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<u32>>, Vec<Vec<f64>>)> {
    let setup: Setup = setup.parse().map_err(to_py_err)?;
    let cfg = ExperimentConfig {
        m,
        r,
        n: n.unwrap_or(2 * r),
        noise_alpha: alpha,
        seed,
        ..ExperimentConfig::standard(setup)
    };
    let data = experiments::gen_synthetic(&cfg, trial).map_err(to_py_err)?;
    Ok((dense_rows(&data.d), binary_rows(&data.t_star), dense_rows(&data.a_star)))
}

/// Aligned Hamming error and RMSEs of an estimate against the planted factors.
#[pyfunction]
fn align_and_score(
    t_star: Vec<Vec<u8>>,
    a_star: Vec<Vec<f64>>,
    t: Vec<Vec<u8>>,
    a: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
) -> PyResult<(f64, f64, f64, f64, Vec<usize>)> {
    let (t_star, t) = (binary(t_star)?, binary(t)?);
    let (a_star, a, d) = (dense(a_star)?, dense(a)?, dense(d)?);
    if t_star.nrows() != t.nrows() || t_star.ncols() != t.ncols() || d.nrows() != t.nrows() {
        return Err(PyValueError::new_err("t_star, t and d shapes do not match"));
    }
    let s = experiments::align_and_score(&t_star, &a_star, &t, &a, &d);
    Ok((s.hamming_norm, s.hamming_raw, s.rmse_signal, s.rmse_fit, s.permutation))
}

#[pymodule]
#[pyo3(name = "bincomp")]
fn bincomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFactorModel>()?;
    m.add_function(wrap_pyfunction!(find_vertices, m)?)?;
    m.add_function(wrap_pyfunction!(factorize_exact, m)?)?;
    m.add_function(wrap_pyfunction!(factorize_three_way, m)?)?;
    m.add_function(wrap_pyfunction!(factorize_approximate, m)?)?;
    m.add_function(wrap_pyfunction!(block_descent, m)?)?;
    m.add_function(wrap_pyfunction!(update_t_rows, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(align_and_score, m)?)?;
    Ok(())
}
