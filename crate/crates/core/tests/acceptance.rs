//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use bincomp::experiments::{
    align_and_score, gen_synthetic, mean_metric, methylation_like, rank_sweep, run_noise_sweep,
    vertex_count_study, ExperimentConfig, Method, Setup, SweepConfig,
};
use bincomp::factorize::{block_descent_traced, update_t_rows};
use bincomp::ilp::{solve_box_feasibility, BoxFeasibilityProblem, DEFAULT_FEAS_TOL, DEFAULT_MAX_POOL};
use bincomp::io::{self, Format};
use bincomp::vertices::{filter_candidates_incremental, CandidateBatch, LiftingMap};
use bincomp::{
    factorize_exact, find_vertices_affine, AConstraint, ApproxConfig, BinaryMatrix, DenseMatrix, ExactMode,
    ExactOptions, HullMode, VertexOptions,
};
use common::*;
use nalgebra::DVector;
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    // Written to the raw handle so the line shows even under output capture.
    let line = format!("{} [{id:>2}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn cli(args: &[&str]) -> i32 {
    bincomp::cli::run(std::iter::once("bincomp").chain(args.iter().copied()))
}

fn read_binary(path: &Path) -> BinaryMatrix {
    BinaryMatrix::from_dense_threshold(&io::read_matrix(path, Format::Csv).unwrap(), 0.5)
}

#[test]
fn exact_recovery_bernoulli_half() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        trials: 100,
        ..ExperimentConfig::standard(Setup::T05)
    };
    let mut recovered = 0;
    let mut failures = Vec::new();
    for trial in 0..cfg.trials {
        let data = gen_synthetic(&cfg, trial as u64).unwrap();
        let input = dir.path().join(format!("d{trial}.csv"));
        io::write_matrix(&data.d, &input, Format::Csv).unwrap();
        let out = dir.path().join(format!("out{trial}"));
        let code = cli(&[
            "factorize",
            "--mode",
            "exact-affine",
            "--input",
            input.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            failures.push(format!("trial {trial}: exit {code}"));
            continue;
        }
        let t = read_binary(&out.join("T.csv"));
        let a = io::read_matrix(&out.join("A.csv"), Format::Csv).unwrap();
        let score = align_and_score(&data.t_star, &data.a_star, &t, &a, &data.d);
        if score.hamming_norm == 0.0 {
            recovered += 1;
        } else {
            failures.push(format!("trial {trial}: hamming {}", score.hamming_norm));
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "exact recovery, T Bernoulli(0.5), m=1000 r=10 n=20",
        recovered >= 99 && elapsed < Duration::from_secs(60),
        format!("{recovered}/100 recovered in {:.1}s {failures:?}", elapsed.as_secs_f64()),
    );
}

#[test]
fn vertex_enumeration_matches_brute_force() {
    let start = Instant::now();
    let mut g = rng(2);
    let mut mismatches = Vec::new();
    let mut bound_violations = 0;
    for inst in 0..200 {
        let m = g.random_range(3..=14);
        let r = g.random_range(1..=4);
        let n = r + g.random_range(0..3);
        let t = random_binary(&mut g, m, r, 0.5);
        let a = random_simplex(&mut g, r, n);
        let d = t.to_dense() * &a;
        let oracle = brute_force_affine_vertices(&d);
        let found = find_vertices_affine(&d, &VertexOptions::default()).unwrap();
        let mut got = found.vertices.clone();
        got.sort();
        if got != oracle {
            mismatches.push(inst);
        }
        let dim = affine_dim(&d);
        if got.len() > 1usize << dim {
            bound_violations += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "vertex enumeration equals 2^m membership scan (200 instances)",
        mismatches.is_empty() && bound_violations == 0 && elapsed < Duration::from_secs(30),
        format!(
            "mismatches {mismatches:?}, bound violations {bound_violations}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn worst_case_face_has_all_vertices() {
    let (m, r) = (10, 5);
    let t = face_matrix(m, r);
    let a = random_simplex(&mut rng(3), r, 7);
    let d = t.to_dense() * &a;
    let set = find_vertices_affine(&d, &VertexOptions::default()).unwrap();
    let oracle = brute_force_affine_vertices(&d);
    report(
        3,
        "worst-case face fixture r=5 m=10",
        set.len() == 16 && oracle.len() == 16,
        format!("{} vertices (brute force {})", set.len(), oracle.len()),
    );
}

#[test]
fn separable_recovery_is_unique() {
    let cfg = ExperimentConfig {
        setup: Setup::Separable,
        m: 100,
        r: 5,
        n: 10,
        noise_alpha: 0.0,
        bernoulli_p: 0.5,
        trials: 100,
        seed: 4,
    };
    let mut exact_count = 0;
    let mut recovered = 0;
    for trial in 0..cfg.trials {
        let data = gen_synthetic(&cfg, trial as u64).unwrap();
        let set = find_vertices_affine(&data.d, &VertexOptions::default()).unwrap();
        if set.len() == cfg.r {
            exact_count += 1;
        }
        if let Ok(model) = factorize_exact(&data.d, ExactMode::Affine, &ExactOptions::default()) {
            if sorted_columns(&model.t) == sorted_columns(&data.t_star) {
                recovered += 1;
            }
        }
    }
    report(
        4,
        "separable T, m=100 r=5: exactly r vertices and unique recovery",
        exact_count == 100 && recovered == 100,
        format!("{exact_count}/100 with r vertices, {recovered}/100 recovered"),
    );
}

fn exhaustive_box_codes(w: &DenseMatrix, c: &[f64], tol: f64) -> Vec<u64> {
    let k = w.ncols();
    (0u64..1 << k)
        .filter(|&code| {
            (0..w.nrows()).all(|i| {
                let v: f64 = c[i] + (0..k).filter(|&j| (code >> j) & 1 == 1).map(|j| w[(i, j)]).sum::<f64>();
                v >= -tol && v <= 1.0 + tol
            })
        })
        .collect()
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut g = rng(5);
    let mut mismatches = Vec::new();
    let mut nonempty = 0;
    for inst in 0..50 {
        let k = g.random_range(1..=14);
        let nc = g.random_range(1..=8);
        let w = DenseMatrix::from_fn(nc, k, |_, _| g.random_range(-1.0..1.0));
        // Centre the constraints on a planted code so the pool is rarely empty.
        let planted: u64 = g.random_range(0..1u64 << k);
        let c: Vec<f64> = (0..nc)
            .map(|i| {
                let s: f64 = (0..k).filter(|&j| (planted >> j) & 1 == 1).map(|j| w[(i, j)]).sum();
                g.random_range(0.0..1.0) - s
            })
            .collect();
        let problem = BoxFeasibilityProblem::new(w.clone(), c.clone()).unwrap();
        let pool = solve_box_feasibility(&problem, DEFAULT_FEAS_TOL, DEFAULT_MAX_POOL).unwrap();
        let oracle = exhaustive_box_codes(&w, &c, DEFAULT_FEAS_TOL);
        nonempty += usize::from(!oracle.is_empty());
        if pool.codes != oracle || pool.truncated {
            mismatches.push(inst);
        }
    }

    let cfg = ExperimentConfig {
        m: 200,
        r: 10,
        n: 20,
        trials: 10,
        seed: 55,
        ..ExperimentConfig::standard(Setup::T05)
    };
    let mut exact_hits = 0;
    for trial in 0..cfg.trials {
        let data = gen_synthetic(&cfg, trial as u64).unwrap();
        let lifting = LiftingMap::from_data(&data.d, HullMode::Affine, 1e-10).unwrap();
        let problem = BoxFeasibilityProblem::from_lifting(&lifting);
        let pool = solve_box_feasibility(&problem, DEFAULT_FEAS_TOL, DEFAULT_MAX_POOL).unwrap();
        let mut truth: Vec<u64> = data
            .t_star
            .columns()
            .map(|col| {
                lifting
                    .anchor_rows
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, &row)| acc | (u64::from(col[row]) << j))
            })
            .collect();
        truth.sort_unstable();
        truth.dedup();
        if pool.codes == truth {
            exact_hits += 1;
        }
    }
    report(
        5,
        "branch and bound pool equals exhaustive enumeration",
        mismatches.is_empty() && exact_hits == cfg.trials,
        format!(
            "random: {} mismatches of 50 ({nonempty} nonempty); exact data m=200 r=10: {exact_hits}/{} pools equal true codes",
            mismatches.len(),
            cfg.trials
        ),
    );
}

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn single_row_survivors_obey_littlewood_offord() {
    let mut g = rng(6);
    let mut worst = Vec::new();
    let mut pass = true;
    for k in [4usize, 8, 12] {
        let bound = 2 * binom(k as u64, (k / 2) as u64);
        let mut max_seen = 0;
        let mut fixtures: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; k], -((k / 2) as f64))];
        for _ in 0..20 {
            let w: Vec<f64> = (0..k)
                .map(|_| {
                    let v = g.random_range(1..=4) as f64;
                    if g.random::<bool>() { v } else { -v }
                })
                .collect();
            let neg: f64 = w.iter().filter(|&&x| x < 0.0).sum();
            let c = -(neg + g.random_range(0..=k as i64) as f64);
            fixtures.push((w, c));
        }
        for (w, c) in fixtures {
            let mut basis = DenseMatrix::identity(k + 1, k);
            for j in 0..k {
                basis[(k, j)] = w[j];
            }
            let mut origin = DVector::zeros(k + 1);
            origin[k] = c;
            let lifting = LiftingMap::from_basis(&basis, (0..k).collect(), origin, HullMode::Affine).unwrap();
            let survivors = filter_candidates_incremental(CandidateBatch::full(lifting), &[k], 0.0).codes.len();
            max_seen = max_seen.max(survivors);
            if survivors as u64 > bound {
                pass = false;
            }
        }
        worst.push(format!("k={k}: max {max_seen} <= {bound}"));
    }
    report(6, "single-row survivors within 2*binom(k, k/2)", pass, worst.join(", "));
}

#[test]
fn noisy_recovery_tracks_oracle() {
    let start = Instant::now();
    let base = ExperimentConfig {
        trials: 20,
        seed: 7,
        ..ExperimentConfig::standard(Setup::T05)
    };
    let mut cfg = SweepConfig::new(base);
    cfg.alphas = vec![0.0, 0.02, 0.04, 0.06];
    let rows = run_noise_sweep(&cfg).unwrap();
    let elapsed = start.elapsed();
    let mut pass = rows.iter().all(|r| r.is_ok()) && elapsed < Duration::from_secs(15 * 60);
    let mut detail = Vec::new();
    for &alpha in &cfg.alphas {
        let fv = mean_metric(&rows, Method::FindVertices, alpha, |r| r.hamming).unwrap();
        let or = mean_metric(&rows, Method::Oracle, alpha, |r| r.hamming).unwrap();
        let bx = mean_metric(&rows, Method::Box, alpha, |r| r.hamming).unwrap();
        pass &= (fv - or).abs() <= 0.01;
        if alpha == 0.0 {
            pass &= bx > fv;
        }
        detail.push(format!("α={alpha}: fv {fv:.4} oracle {or:.4} box {bx:.4}"));
    }
    report(
        7,
        "noisy recovery within 0.01 of oracle; box worse at α=0",
        pass,
        format!("{} ({:.1}s)", detail.join("; "), elapsed.as_secs_f64()),
    );
}

#[test]
fn block_descent_monotone_and_rows_exhaustive() {
    let mut g = rng(8);
    let mut violations = 0;
    for _ in 0..50 {
        let (m, r, n) = (g.random_range(10..60), g.random_range(2..7), g.random_range(6..15));
        let t = random_binary(&mut g, m, r, 0.5);
        let a = random_simplex(&mut g, r, n);
        let noise = DenseMatrix::from_fn(m, n, |_, _| g.random_range(-0.2..0.2));
        let d = t.to_dense() * &a + noise;
        let t0 = random_binary(&mut g, m, r, 0.5);
        let (_, trace) = block_descent_traced(&d, &t0, 30);
        for w in trace.objectives.windows(2) {
            if w[1] > w[0] + 1e-10 * w[0].max(1.0) {
                violations += 1;
            }
        }
    }
    let mut row_mismatch = 0;
    for r in [1usize, 3, 6, 9, 12] {
        let m = 15;
        let n = r + 3;
        let a = DenseMatrix::from_fn(r, n, |_, _| g.random_range(-1.0..1.0));
        let d = DenseMatrix::from_fn(m, n, |_, _| g.random_range(-1.0..2.0));
        let fast = update_t_rows(&d, &a);
        let slow = exhaustive_rows(&d, &a);
        for i in 0..m {
            let (f, s) = (row_objective(&d, &a, i, fast.row_code(i)), row_objective(&d, &a, i, slow.row_code(i)));
            if (f - s).abs() > 1e-9 * (1.0 + s) {
                row_mismatch += 1;
            }
        }
    }
    report(
        8,
        "block descent monotone; row updates equal exhaustive scan",
        violations == 0 && row_mismatch == 0,
        format!("{violations} monotonicity violations over 50 runs, {row_mismatch} row mismatches"),
    );
}

#[test]
fn vertex_count_study_moderate_p() {
    let p_grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let rows = vertex_count_study(500, &[8], &p_grid, 20, 9);
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &rows {
        if [0.3, 0.5, 0.7].contains(&row.p) {
            pass &= row.max_count == Some(8) && row.status == "ok";
        }
        detail.push(format!("p={}: max {:?} ({})", row.p, row.max_count, row.status));
    }
    report(9, "vertex count m=500 r=8: max count 8 for p in {0.3,0.5,0.7}", pass, detail.join(", "));
}

#[test]
fn rank_sweep_flattens_at_true_rank() {
    let levels = (0.1, 0.9);
    let data = methylation_like(500, 12, 4, 0.01, levels, 10);
    let mut cfg = ApproxConfig::new(2);
    cfg.restarts = 10;
    cfg.levels = levels;
    cfg.a_constraint = AConstraint::Simplex;
    cfg.seed = 10;
    let rows = rank_sweep(&data.d, 2, 6, &cfg).unwrap();
    let rmse = |r: usize| rows.iter().find(|x| x.r == r).and_then(|x| x.rmse).unwrap_or(f64::NAN);
    let (r2, r4, r6) = (rmse(2), rmse(4), rmse(6));
    report(
        10,
        "rank sweep flattens after the true rank",
        r4 - r6 < 0.1 * (r2 - r4),
        format!(
            "RMSE {:?}; RMSE(4)-RMSE(6) = {:.2e}, 0.1*(RMSE(2)-RMSE(4)) = {:.2e}",
            rows.iter().map(|x| x.rmse.map(|v| (v * 1e4).round() / 1e4)).collect::<Vec<_>>(),
            r4 - r6,
            0.1 * (r2 - r4)
        ),
    );
}

fn masked_manifest(path: &Path, dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap().replace(dir.to_str().unwrap(), "<dir>");
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

fn dir_snapshot(dir: &Path, root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let bytes = if name == "manifest.json" {
                serde_json::to_vec(&masked_manifest(&p, root)).unwrap()
            } else {
                std::fs::read(&p).unwrap()
            };
            (name, bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn cli_runs_are_deterministic() {
    let data = methylation_like(80, 8, 3, 0.02, (0.1, 0.9), 11);
    let mut ok = true;
    let mut compared = 0;
    let runs: [&[&str]; 3] = [
        &["factorize", "--mode", "approx", "--rank", "3", "--restarts", "6", "--refine", "backward-elim", "--polish-iters", "5", "--levels", "0.1,0.9", "--seed", "3"],
        &["bench", "sweep", "--m", "60", "--r", "3", "--trials", "3", "--alphas", "0,0.05", "--seed", "2"],
        &["bench", "rank-sweep", "--r-min", "2", "--r-max", "4", "--restarts", "4", "--seed", "5"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let mut snaps = Vec::new();
        for threads in ["1", "4"] {
            let root = tempfile::tempdir().unwrap();
            let input = root.path().join("d.csv");
            io::write_matrix(&data.d, &input, Format::Csv).unwrap();
            let out = root.path().join("out");
            let mut argv: Vec<&str> = args.to_vec();
            if k != 1 {
                argv.extend(["--input", input.to_str().unwrap()]);
            }
            argv.extend(["--out-dir", out.to_str().unwrap(), "--threads", threads]);
            ok &= cli(&argv) == 0;
            snaps.push(dir_snapshot(&out, root.path()));
        }
        compared += snaps[0].len();
        ok &= !snaps[0].is_empty() && snaps[0] == snaps[1];
    }
    report(
        11,
        "repeated CLI runs are byte-identical",
        ok,
        format!("{compared} files compared across 1 and 4 threads"),
    );
}
