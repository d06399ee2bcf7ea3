use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorize::{update_t_rows, AConstraint, Diagnostics, FactorModel};
use crate::linalg;
use crate::matrix::{BinaryMatrix, DenseMatrix};
use crate::rng;

const BOX_MAX_OUTER: usize = 200;
const BOX_INNER_SWEEPS: usize = 5;
const BOX_REL_TOL: f64 = 1e-9;

/// Row-wise exhaustive fit of `T` given the true mixing matrix.
pub fn oracle_solve(d: &DenseMatrix, a_star: &DenseMatrix) -> BinaryMatrix {
    update_t_rows(d, a_star)
}

#[derive(Clone, Debug)]
pub struct BoxOutcome {
    pub model: FactorModel,
    /// Objective `||D - T A||_F^2` after each half-step, one trace per restart.
    pub objective_traces: Vec<Vec<f64>>,
    pub best_restart: usize,
}

/// Cyclic coordinate descent on `min_{t ∈ [0,1]^r} t'Gt - 2h't` for every row.
fn box_rows(d: &DenseMatrix, a: &DenseMatrix, t: &mut DenseMatrix) {
    let r = a.nrows();
    let g = a * a.transpose();
    let h = a * d.transpose();
    let rows: Vec<DVector<f64>> = (0..t.nrows())
        .into_par_iter()
        .map(|i| {
            let mut x: DVector<f64> = t.row(i).transpose();
            for _ in 0..BOX_INNER_SWEEPS {
                for k in 0..r {
                    if g[(k, k)] <= 0.0 {
                        continue;
                    }
                    let rest = g.column(k).dot(&x) - g[(k, k)] * x[k];
                    x[k] = ((h[(k, i)] - rest) / g[(k, k)]).clamp(0.0, 1.0);
                }
            }
            x
        })
        .collect();
    for (i, x) in rows.into_iter().enumerate() {
        t.set_row(i, &x.transpose());
    }
}

fn objective(d: &DenseMatrix, t: &DenseMatrix, a: &DenseMatrix) -> f64 {
    (d - t * a).norm_squared()
}

/// Box relaxation `T ∈ [0,1]^{m×r}` solved by alternating least squares in
/// `A` and coordinate descent in `T`, best of `restarts` uniform
/// initializations, then rounded at 0.5 with `A` refitted.
pub fn box_baseline(d: &DenseMatrix, r: usize, restarts: usize, seed: u64) -> Result<BoxOutcome> {
    if r == 0 || restarts == 0 {
        return Err(Error::InvalidArgument("box baseline needs r >= 1 and restarts >= 1".into()));
    }
    let m = d.nrows();
    let runs: Vec<(DenseMatrix, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|l| {
            let mut rng = rng::stream(seed, l as u64);
            let mut t = DenseMatrix::from_fn(m, r, |_, _| rng.random::<f64>());
            let mut trace = Vec::new();
            let mut prev = f64::INFINITY;
            for _ in 0..BOX_MAX_OUTER {
                let a = linalg::least_squares(&t, d);
                trace.push(objective(d, &t, &a));
                box_rows(d, &a, &mut t);
                let f = objective(d, &t, &a);
                trace.push(f);
                if !f.is_finite() {
                    return Err(Error::ConvergenceFailure {
                        iterations: trace.len(),
                        residual: f,
                    });
                }
                if prev - f <= BOX_REL_TOL * prev.max(1e-300) {
                    break;
                }
                prev = f;
            }
            Ok((t, trace))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (l, (_, trace)) in runs.iter().enumerate() {
        if trace.last() < runs[best].1.last() {
            best = l;
        }
    }
    let t = BinaryMatrix::from_dense_threshold(&runs[best].0, 0.5);
    let a = linalg::least_squares(&t.to_dense(), d);
    let iterations = runs[best].1.len() / 2;
    let diagnostics = Diagnostics {
        restarts_used: restarts,
        iterations,
        ..Default::default()
    };
    Ok(BoxOutcome {
        model: FactorModel::new(d, t, a, None, AConstraint::Free, (0.0, 1.0), diagnostics),
        objective_traces: runs.into_iter().map(|(_, tr)| tr).collect(),
        best_restart: best,
    })
}
