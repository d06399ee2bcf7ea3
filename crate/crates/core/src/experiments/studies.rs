use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{box_baseline, oracle_solve};
use super::metrics::{align_and_score, ScoreReport};
use super::synth::{bernoulli_matrix, gen_synthetic, ExperimentConfig};
use crate::error::{Error, Result};
use crate::factorize::{factorize_approximate, ApproxConfig, Refine};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::matrix::DenseMatrix;
use crate::rng;
use crate::vertices::{find_vertices_affine, VertexOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FindVertices,
    Oracle,
    Box,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FindVertices => "findvertices",
            Method::Oracle => "oracle",
            Method::Box => "box",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "findvertices" | "find-vertices" => Ok(Method::FindVertices),
            "oracle" => Ok(Method::Oracle),
            "box" => Ok(Method::Box),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

/// Noise grid used when none is given.
pub fn default_noise_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 100.0).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Base configuration; its `noise_alpha` is ignored in favour of `alphas`.
    pub base: ExperimentConfig,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    /// Settings of `findvertices` (default: 20 restarts, backward elimination,
    /// 20 polishing sweeps); `r` is taken from `base`.
    pub approx: ApproxConfig,
    pub box_restarts: usize,
}

impl SweepConfig {
    pub fn new(base: ExperimentConfig) -> Self {
        let mut approx = ApproxConfig::new(base.r);
        approx.restarts = 20;
        approx.refine = Refine::BackwardElim;
        approx.polish_iters = 20;
        approx.seed = base.seed;
        Self {
            base,
            alphas: default_noise_grid(),
            methods: vec![Method::FindVertices, Method::Oracle, Method::Box],
            approx,
            box_restarts: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setup: String,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    pub alpha: f64,
    pub trial: usize,
    pub method: String,
    /// `ok` or `failed: <reason>`; metrics are NaN on failure.
    pub status: String,
    pub hamming: f64,
    pub hamming_raw: f64,
    pub rmse_signal: f64,
    pub rmse_fit: f64,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn run_method(method: Method, cfg: &SweepConfig, data: &super::SyntheticData, trial: usize) -> Result<ScoreReport> {
    let (t, a) = match method {
        Method::FindVertices => {
            let mut approx = cfg.approx.clone();
            approx.r = cfg.base.r;
            approx.seed = rng::substream(cfg.approx.seed, trial as u64);
            let model = factorize_approximate(&data.d, &approx)?;
            (model.t, model.a)
        }
        Method::Oracle => (oracle_solve(&data.d, &data.a_star), data.a_star.clone()),
        Method::Box => {
            let seed = rng::substream(cfg.base.seed ^ 0xB0B0, trial as u64);
            let out = box_baseline(&data.d, cfg.base.r, cfg.box_restarts, seed)?;
            (out.model.t, out.model.a)
        }
    };
    Ok(align_and_score(&data.t_star, &data.a_star, &t, &a, &data.d))
}

/// Runs every method on every `(α, trial)` cell. Rows come back sorted by
/// `(α index, trial, method order)` regardless of scheduling.
pub fn run_noise_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.base.validate()?;
    if cfg.alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::InvalidArgument("noise levels must be nonnegative".into()));
    }
    let cells: Vec<(usize, usize)> = (0..cfg.alphas.len())
        .flat_map(|ai| (0..cfg.base.trials).map(move |trial| (ai, trial)))
        .collect();
    let mut rows: Vec<(usize, usize, usize, SweepRow)> = cells
        .par_iter()
        .flat_map_iter(|&(ai, trial)| {
            let mut ecfg = cfg.base.clone();
            ecfg.noise_alpha = cfg.alphas[ai];
            let data = gen_synthetic(&ecfg, trial as u64);
            cfg.methods
                .iter()
                .enumerate()
                .map(|(mi, &method)| {
                    let outcome = match &data {
                        Ok(data) => run_method(method, cfg, data, trial),
                        Err(e) => Err(Error::InvalidArgument(e.to_string())),
                    };
                    let row = make_row(&ecfg, trial, method, outcome);
                    (ai, trial, mi, row)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    rows.sort_by_key(|&(ai, trial, mi, _)| (ai, trial, mi));
    Ok(rows.into_iter().map(|(.., row)| row).collect())
}

fn make_row(cfg: &ExperimentConfig, trial: usize, method: Method, outcome: Result<ScoreReport>) -> SweepRow {
    let (status, s) = match outcome {
        Ok(s) => ("ok".to_string(), Some(s)),
        Err(e) => (format!("failed: {e}"), None),
    };
    let get = |f: fn(&ScoreReport) -> f64| s.as_ref().map_or(f64::NAN, f);
    SweepRow {
        setup: cfg.setup.name().to_string(),
        m: cfg.m,
        r: cfg.r,
        n: cfg.n,
        alpha: cfg.noise_alpha,
        trial,
        method: method.name().to_string(),
        status,
        hamming: get(|s| s.hamming_norm),
        hamming_raw: get(|s| s.hamming_raw),
        rmse_signal: get(|s| s.rmse_signal),
        rmse_fit: get(|s| s.rmse_fit),
    }
}

/// Mean of `metric` over successful rows matching `method` and `alpha`.
pub fn mean_metric(rows: &[SweepRow], method: Method, alpha: f64, metric: fn(&SweepRow) -> f64) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.is_ok() && r.method == method.name() && r.alpha == alpha)
        .map(metric)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() { "NaN".into() } else { format!("{x:.16e}") }
}

/// Writes serializable rows as CSV with a header row.
pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep rows in CSV form, floats at 17 significant digits.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record([
        "setup", "m", "r", "n", "alpha", "trial", "method", "status", "hamming", "hamming_raw", "rmse_signal",
        "rmse_fit",
    ])
    .map_err(err)?;
    for row in rows {
        w.write_record([
            row.setup.clone(),
            row.m.to_string(),
            row.r.to_string(),
            row.n.to_string(),
            fmt_num(row.alpha),
            row.trial.to_string(),
            row.method.clone(),
            row.status.clone(),
            fmt_num(row.hamming),
            fmt_num(row.hamming_raw),
            fmt_num(row.rmse_signal),
            fmt_num(row.rmse_fit),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexCountRow {
    pub r: usize,
    pub p: f64,
    pub trials: usize,
    pub max_count: Option<usize>,
    pub min_count: Option<usize>,
    /// Trials that returned exactly `r` vertices.
    pub exact_r: usize,
    /// `ok`, or the first per-trial error.
    pub status: String,
}

/// Number of binary vectors in `aff(T)` for Bernoulli(`p`) matrices `T`,
/// using `T` itself as the data matrix.
pub fn vertex_count_study(m: usize, r_list: &[usize], p_grid: &[f64], trials: usize, seed: u64) -> Vec<VertexCountRow> {
    let cells: Vec<(usize, usize, usize)> = r_list
        .iter()
        .enumerate()
        .flat_map(|(ri, _)| (0..p_grid.len()).flat_map(move |pi| (0..trials).map(move |t| (ri, pi, t))))
        .collect();
    let counts: Vec<(usize, usize, Result<usize>)> = cells
        .par_iter()
        .map(|&(ri, pi, trial)| {
            let (r, p) = (r_list[ri], p_grid[pi]);
            let key = ((ri as u64) << 40) ^ ((pi as u64) << 20) ^ trial as u64;
            let mut g = rng::stream(seed, key);
            let t = bernoulli_matrix(&mut g, m, r, |_| p);
            let count = find_vertices_affine(&t.to_dense(), &VertexOptions::default()).map(|v| v.len());
            (ri, pi, count)
        })
        .collect();
    let mut rows = Vec::new();
    for (ri, &r) in r_list.iter().enumerate() {
        for (pi, &p) in p_grid.iter().enumerate() {
            let cell: Vec<&Result<usize>> = counts
                .iter()
                .filter(|(a, b, _)| *a == ri && *b == pi)
                .map(|(.., c)| c)
                .collect();
            let ok: Vec<usize> = cell.iter().filter_map(|c| c.as_ref().ok().copied()).collect();
            let status = cell
                .iter()
                .find_map(|c| c.as_ref().err())
                .map_or_else(|| "ok".to_string(), |e| format!("failed: {e}"));
            rows.push(VertexCountRow {
                r,
                p,
                trials,
                max_count: ok.iter().max().copied(),
                min_count: ok.iter().min().copied(),
                exact_r: ok.iter().filter(|&&c| c == r).count(),
                status,
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSweepRow {
    pub r: usize,
    pub rmse: Option<f64>,
    pub status: String,
}

/// `||D - T A||_F / sqrt(mn)` of the approximate factorization for each
/// rank in `r_min..=r_max`; `cfg.r` is overridden.
pub fn rank_sweep(d: &DenseMatrix, r_min: usize, r_max: usize, cfg: &ApproxConfig) -> Result<Vec<RankSweepRow>> {
    if r_min > r_max {
        return Err(Error::InvalidArgument(format!("empty rank range {r_min}..={r_max}")));
    }
    let scale = ((d.nrows() * d.ncols()) as f64).sqrt();
    Ok((r_min..=r_max)
        .map(|r| {
            let mut c = cfg.clone();
            c.r = r;
            match factorize_approximate(d, &c) {
                Ok(model) => RankSweepRow {
                    r,
                    rmse: Some(model.residual_fro / scale),
                    status: "ok".into(),
                },
                Err(e) => RankSweepRow {
                    r,
                    rmse: None,
                    status: format!("failed: {e}"),
                },
            }
        })
        .collect())
}

/// Numerical rank used when none is supplied.
pub fn detect_rank(d: &DenseMatrix) -> usize {
    linalg::select_pivots(d, None, DEFAULT_RANK_TOL).map_or(0, |p| p.numerical_rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Setup;

    fn small() -> SweepConfig {
        let base = ExperimentConfig {
            setup: Setup::T05,
            m: 60,
            r: 3,
            n: 6,
            noise_alpha: 0.0,
            bernoulli_p: 0.5,
            trials: 2,
            seed: 5,
        };
        let mut cfg = SweepConfig::new(base);
        cfg.alphas = vec![0.0, 0.05];
        cfg.box_restarts = 2;
        cfg
    }

    #[test]
    fn sweep_row_count_and_order() {
        let cfg = small();
        let rows = run_noise_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        assert_eq!(rows[0].method, "findvertices");
        assert_eq!(rows[3].trial, 1);
        assert!(rows.iter().all(|r| r.is_ok()));
        assert_eq!(rows, run_noise_sweep(&cfg).unwrap());
    }

    #[test]
    fn single_column_has_one_vertex() {
        let rows = vertex_count_study(20, &[1], &[0.3, 0.7], 3, 1);
        assert!(rows.iter().all(|r| r.max_count == Some(1) && r.min_count == Some(1)));
    }

    #[test]
    fn rank_sweep_row_count() {
        let d = DenseMatrix::from_fn(20, 5, |i, j| ((i * 3 + j) % 4) as f64);
        let rows = rank_sweep(&d, 2, 4, &ApproxConfig::new(2)).unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = run_noise_sweep(&small()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rows.len() + 1);
        assert!(text.starts_with("setup,m,r,n,alpha,trial,method,status,hamming"));
    }
}
