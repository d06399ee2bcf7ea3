//! Synthetic benchmarks: data generators, scoring, baselines and sweeps.

mod baselines;
mod metrics;
mod studies;
mod synth;

pub use baselines::{box_baseline, oracle_solve, BoxOutcome};
pub use metrics::{align_and_score, min_cost_assignment, ScoreReport};
pub use studies::{
    default_noise_grid, detect_rank, mean_metric, rank_sweep, run_noise_sweep, vertex_count_study, write_csv,
    write_sweep_csv, Method, RankSweepRow, SweepConfig, SweepRow, VertexCountRow,
};
pub use synth::{gen_synthetic, methylation_like, ExperimentConfig, Setup, SyntheticData};
