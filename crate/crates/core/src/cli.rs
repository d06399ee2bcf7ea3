//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig, Method, Setup, SweepConfig};
use crate::factorize::{self, AConstraint, ApproxConfig, ExactMode, ExactOptions, FactorModel, Refine};
use crate::io::{self, Format};
use crate::matrix::DenseMatrix;
use crate::vertices::{self, HullMode, Pruning, VertexOptions, DEFAULT_TOL_BINARY};

pub const THREADS_ENV: &str = "BINCOMP_THREADS";

#[derive(Parser, Debug)]
#[command(name = "bincomp", version, about = "Binary component decomposition of real matrices")]
pub struct Cli {
    /// Worker threads (default: all cores; falls back to BINCOMP_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Binary vectors in the affine hull or span of the data columns.
    FindVertices(FindVerticesArgs),
    /// Factorize D = T A with binary T.
    Factorize(FactorizeArgs),
    /// Synthetic benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand, Debug)]
pub enum BenchCommand {
    /// Noise sweep comparing findvertices, oracle and box.
    Sweep(SweepArgs),
    /// Number of binary vectors in aff(T) for random Bernoulli T.
    VertexCount(VertexCountArgs),
    /// Approximate fit error as a function of the rank.
    RankSweep(RankSweepArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    /// Input matrix (rows = features, columns = samples).
    #[arg(long)]
    pub input: PathBuf,
    /// Input/output format; inferred from the input extension if omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Tsv,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Affine,
    Span,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PruningArg {
    Full,
    Incremental,
    Ilp,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorModeArg {
    ExactAffine,
    ExactLinear,
    ExactSimplex,
    ThreeWay,
    Approx,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineArg {
    None,
    BestFit,
    BackwardElim,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintArg {
    Free,
    Affine,
    Simplex,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum SetupArg {
    #[value(name = "T05")]
    T05,
    #[value(name = "TsparseDense")]
    TsparseDense,
    #[value(name = "T05Adense")]
    T05Adense,
    #[value(name = "Separable")]
    Separable,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Findvertices,
    Oracle,
    Box,
}

#[derive(Args, Debug, Serialize)]
pub struct FindVerticesArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "affine")]
    pub mode: ModeArg,
    /// Number of components; inferred from the numerical rank if omitted.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Distance to {0,1} accepted as binary.
    #[arg(long, default_value_t = DEFAULT_TOL_BINARY)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "incremental")]
    pub pruning: PruningArg,
}

#[derive(Args, Debug, Serialize)]
pub struct FactorizeArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "exact-affine")]
    pub mode: FactorModeArg,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL_BINARY)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "incremental")]
    pub pruning: PruningArg,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value = "best-fit")]
    pub refine: RefineArg,
    #[arg(long, default_value_t = 0)]
    pub polish_iters: usize,
    /// Values standing in for 0 and 1, as `lo,hi`.
    #[arg(long, value_parser = parse_levels, default_value = "0,1")]
    pub levels: (f64, f64),
    /// Constraint on the columns of A in approximate mode.
    #[arg(long, value_enum, default_value = "free")]
    pub a_constraint: ConstraintArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "T05")]
    pub setup: SetupArg,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    /// Number of samples; defaults to 2r.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "findvertices,oracle,box")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value = "backward-elim")]
    pub refine: RefineArg,
    #[arg(long, default_value_t = 20)]
    pub polish_iters: usize,
    #[arg(long, default_value_t = 5)]
    pub box_restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct VertexCountArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub r: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct RankSweepArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub r_min: usize,
    #[arg(long, default_value_t = 8)]
    pub r_max: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value = "best-fit")]
    pub refine: RefineArg,
    #[arg(long, default_value_t = 0)]
    pub polish_iters: usize,
    #[arg(long, value_parser = parse_levels, default_value = "0,1")]
    pub levels: (f64, f64),
    #[arg(long, value_enum, default_value = "free")]
    pub a_constraint: ConstraintArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_levels(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected 'lo,hi', got '{s}'"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("bad level '{lo}': {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad level '{hi}': {e}"))?;
    if !(lo < hi) {
        return Err(format!("levels must satisfy lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Tsv => Format::Tsv,
        }
    }
}

impl From<PruningArg> for Pruning {
    fn from(p: PruningArg) -> Self {
        match p {
            PruningArg::Full => Pruning::Full,
            PruningArg::Incremental => Pruning::Incremental,
            PruningArg::Ilp => Pruning::Ilp,
        }
    }
}

impl From<RefineArg> for Refine {
    fn from(r: RefineArg) -> Self {
        match r {
            RefineArg::None => Refine::None,
            RefineArg::BestFit => Refine::BestFit,
            RefineArg::BackwardElim => Refine::BackwardElim,
        }
    }
}

impl From<ConstraintArg> for AConstraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Free => AConstraint::Free,
            ConstraintArg::Affine => AConstraint::Affine,
            ConstraintArg::Simplex => AConstraint::Simplex,
        }
    }
}

impl From<SetupArg> for Setup {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::T05 => Setup::T05,
            SetupArg::TsparseDense => Setup::TsparseDense,
            SetupArg::T05Adense => Setup::T05Adense,
            SetupArg::Separable => Setup::Separable,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Findvertices => Method::FindVertices,
            MethodArg::Oracle => Method::Oracle,
            MethodArg::Box => Method::Box,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    FindVertices,
    Factorize,
    BenchSweep,
    BenchVertexCount,
    BenchRankSweep,
}

/// Record of one invocation, written as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: Value,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock durations in microseconds, keyed by stage.
    pub timings: BTreeMap<String, u64>,
}

impl RunManifest {
    fn new(command: CommandKind, config: Value) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("bincomp".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            versions,
            timings: BTreeMap::new(),
        }
    }
}

struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.manifest.outputs.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(name);
        write_json(&p, value)
    }

    fn finish(mut self, started: Instant) -> Result<()> {
        let p = self.dir.join("manifest.json");
        self.manifest.outputs.push(p.clone());
        self.manifest
            .timings
            .insert("total".into(), started.elapsed().as_micros() as u64);
        write_json(&p, &self.manifest)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(w, value).map_err(|e| Error::Io(e.into()))
}

fn to_config(args: &impl Serialize) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn load(io: &InputArgs) -> Result<(DenseMatrix, Format)> {
    let format = io.format.map_or_else(|| Format::from_path(&io.input), Format::from);
    Ok((io::read_matrix(&io.input, format)?, format))
}

fn timed<T>(timings: &mut BTreeMap<String, u64>, key: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f();
    timings.insert(key.into(), t0.elapsed().as_micros() as u64);
    out
}

fn run_find_vertices(args: &FindVerticesArgs, started: Instant) -> Result<()> {
    let (d, format) = load(&args.io)?;
    let mut manifest = RunManifest::new(CommandKind::FindVertices, to_config(args));
    manifest.inputs.push(args.io.input.clone());
    let opts = VertexOptions {
        rank: args.rank,
        tol_binary: args.tol,
        pruning: args.pruning.into(),
        ..Default::default()
    };
    let mode = match args.mode {
        ModeArg::Affine => HullMode::Affine,
        ModeArg::Span => HullMode::Span,
    };
    let set = timed(&mut manifest.timings, "find_vertices", || vertices::find_vertices(&d, mode, &opts))?;

    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let m = d.nrows();
    let rows = DenseMatrix::from_fn(set.len(), m, |k, i| set.vertices[k][i] as f64);
    let p = out.path(&format!("vertices.{}", format.extension()));
    write_binary_rows(&rows, &p, format)?;
    out.json(
        "metrics.json",
        &json!({
            "vertex_count": set.len(),
            "codes": set.codes,
            "nrows": m,
            "ncols": d.ncols(),
        }),
    )?;
    out.finish(started)
}

fn write_binary_rows(rows: &DenseMatrix, path: &Path, format: Format) -> Result<()> {
    let t = crate::matrix::BinaryMatrix::from_dense_threshold(rows, 0.5);
    io::write_binary(&t, path, format)
}

fn run_factorize(args: &FactorizeArgs, started: Instant) -> Result<()> {
    let (d, format) = load(&args.io)?;
    let mut manifest = RunManifest::new(CommandKind::Factorize, to_config(args));
    manifest.inputs.push(args.io.input.clone());
    let exact = ExactOptions {
        vertex: VertexOptions {
            rank: args.rank,
            tol_binary: args.tol,
            pruning: args.pruning.into(),
            ..Default::default()
        },
        ..Default::default()
    };
    let model: FactorModel = timed(&mut manifest.timings, "factorize", || match args.mode {
        FactorModeArg::ExactAffine => factorize::factorize_exact(&d, ExactMode::Affine, &exact),
        FactorModeArg::ExactLinear => factorize::factorize_exact(&d, ExactMode::Linear, &exact),
        FactorModeArg::ExactSimplex => factorize::factorize_exact(&d, ExactMode::Simplex, &exact),
        FactorModeArg::ThreeWay => factorize::factorize_three_way(&d, args.rank, &exact),
        FactorModeArg::Approx => {
            let r = args.rank.unwrap_or_else(|| experiments::detect_rank(&d));
            let cfg = ApproxConfig {
                r,
                restarts: args.restarts,
                refine: args.refine.into(),
                polish_iters: args.polish_iters,
                levels: args.levels,
                seed: args.seed,
                a_constraint: args.a_constraint.into(),
            };
            factorize::factorize_approximate(&d, &cfg)
        }
    })?;

    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let ext = format.extension();
    let p = out.path(&format!("T.{ext}"));
    io::write_binary(&model.t, &p, format)?;
    let p = out.path(&format!("A.{ext}"));
    io::write_matrix(&model.a, &p, format)?;
    if let Some(w) = &model.w {
        let p = out.path(&format!("W.{ext}"));
        io::write_matrix(w, &p, format)?;
    }
    let norm = d.norm();
    let scale = ((d.nrows() * d.ncols()) as f64).sqrt();
    out.json(
        "metrics.json",
        &json!({
            "rank": model.rank(),
            "residual_fro": model.residual_fro,
            "relative_residual": if norm > 0.0 { model.residual_fro / norm } else { 0.0 },
            "rmse": model.residual_fro / scale.max(1.0),
            "levels": [model.levels.0, model.levels.1],
            "a_constraint": model.a_constraint,
            "diagnostics": model.diagnostics,
        }),
    )?;
    out.finish(started)
}

fn run_sweep(args: &SweepArgs, started: Instant) -> Result<()> {
    let base = ExperimentConfig {
        setup: args.setup.into(),
        m: args.m,
        r: args.r,
        n: args.n.unwrap_or(2 * args.r),
        noise_alpha: 0.0,
        bernoulli_p: args.p,
        trials: args.trials,
        seed: args.seed,
    };
    let mut cfg = SweepConfig::new(base);
    cfg.alphas = args.alphas.clone();
    cfg.methods = args.methods.iter().map(|&m| m.into()).collect();
    cfg.approx.restarts = args.restarts;
    cfg.approx.refine = args.refine.into();
    cfg.approx.polish_iters = args.polish_iters;
    cfg.box_restarts = args.box_restarts;
    cfg.approx.validate()?;

    let mut manifest = RunManifest::new(CommandKind::BenchSweep, to_config(args));
    let rows = timed(&mut manifest.timings, "sweep", || experiments::run_noise_sweep(&cfg))?;
    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let p = out.path("sweep.csv");
    experiments::write_sweep_csv(&rows, BufWriter::new(fs::File::create(&p)?))?;

    let mut summary = Vec::new();
    for &alpha in &cfg.alphas {
        for &method in &cfg.methods {
            summary.push(json!({
                "alpha": alpha,
                "method": method.name(),
                "mean_hamming": experiments::mean_metric(&rows, method, alpha, |r| r.hamming),
                "mean_rmse_signal": experiments::mean_metric(&rows, method, alpha, |r| r.rmse_signal),
                "mean_rmse_fit": experiments::mean_metric(&rows, method, alpha, |r| r.rmse_fit),
                "failures": rows.iter().filter(|r| r.alpha == alpha && r.method == method.name() && !r.is_ok()).count(),
            }));
        }
    }
    out.json("metrics.json", &summary)?;
    out.finish(started)
}

fn run_vertex_count(args: &VertexCountArgs, started: Instant) -> Result<()> {
    if args.m == 0 || args.trials == 0 || args.r.iter().any(|&r| r == 0) {
        return Err(Error::InvalidArgument("m, r and trials must be positive".into()));
    }
    if args.p.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidArgument("p must lie in (0, 1)".into()));
    }
    let mut manifest = RunManifest::new(CommandKind::BenchVertexCount, to_config(args));
    let rows = timed(&mut manifest.timings, "study", || {
        Ok(experiments::vertex_count_study(args.m, &args.r, &args.p, args.trials, args.seed))
    })?;
    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let p = out.path("vertex_counts.csv");
    experiments::write_csv(&rows, BufWriter::new(fs::File::create(&p)?))?;
    out.finish(started)
}

fn run_rank_sweep(args: &RankSweepArgs, started: Instant) -> Result<()> {
    let (d, _) = load(&args.io)?;
    let cfg = ApproxConfig {
        r: args.r_min.max(2),
        restarts: args.restarts,
        refine: args.refine.into(),
        polish_iters: args.polish_iters,
        levels: args.levels,
        seed: args.seed,
        a_constraint: args.a_constraint.into(),
    };
    cfg.validate()?;
    let mut manifest = RunManifest::new(CommandKind::BenchRankSweep, to_config(args));
    manifest.inputs.push(args.io.input.clone());
    let rows = timed(&mut manifest.timings, "rank_sweep", || {
        experiments::rank_sweep(&d, args.r_min, args.r_max, &cfg)
    })?;
    let mut out = Outputs::new(&args.out_dir, manifest)?;
    let p = out.path("rank_sweep.csv");
    experiments::write_csv(&rows, BufWriter::new(fs::File::create(&p)?))?;
    out.finish(started)
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'"))),
        _ => Ok(0),
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let started = Instant::now();
    pool.install(|| match &cli.command {
        Command::FindVertices(a) => run_find_vertices(a, started),
        Command::Factorize(a) => run_factorize(a, started),
        Command::Bench(BenchCommand::Sweep(a)) => run_sweep(a, started),
        Command::Bench(BenchCommand::VertexCount(a)) => run_vertex_count(a, started),
        Command::Bench(BenchCommand::RankSweep(a)) => run_rank_sweep(a, started),
    })
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on usage or input errors, 2 on algorithmic failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_algorithmic() { 2 } else { 1 }
        }
    }
}
