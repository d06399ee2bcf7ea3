use nalgebra::DVector;
use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::project_capped_simplex;
use crate::matrix::{BinaryMatrix, DenseMatrix};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setup {
    /// i.i.d. Bernoulli(p) entries.
    T05,
    /// First half of the columns Bernoulli(0.1), second half Bernoulli(0.9).
    TsparseDense,
    /// As `T05`, with the columns of `A` projected to entries at most `2/r`.
    T05Adense,
    /// `T = Π [M; I_r]` for a random row permutation `Π`.
    Separable,
}

impl Setup {
    pub fn name(self) -> &'static str {
        match self {
            Setup::T05 => "T05",
            Setup::TsparseDense => "TsparseDense",
            Setup::T05Adense => "T05Adense",
            Setup::Separable => "Separable",
        }
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '.', '+', ','], "").as_str() {
            "t05" => Ok(Setup::T05),
            "tsparsedense" => Ok(Setup::TsparseDense),
            "t05adense" => Ok(Setup::T05Adense),
            "separable" => Ok(Setup::Separable),
            _ => Err(Error::InvalidArgument(format!("unknown setup '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub m: usize,
    pub r: usize,
    pub n: usize,
    pub noise_alpha: f64,
    pub bernoulli_p: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// The main synthetic setup: `m = 1000`, `r = 10`, `n = 2r`.
    pub fn standard(setup: Setup) -> Self {
        Self {
            setup,
            m: 1000,
            r: 10,
            n: 20,
            noise_alpha: 0.0,
            bernoulli_p: 0.5,
            trials: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.r == 0 || self.n == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("m, r, n and trials must be positive".into()));
        }
        if self.n < self.r {
            return Err(Error::InvalidArgument(format!("n = {} < r = {}", self.n, self.r)));
        }
        if !(self.noise_alpha >= 0.0) {
            return Err(Error::InvalidArgument("noise level must be nonnegative".into()));
        }
        if !(self.bernoulli_p > 0.0 && self.bernoulli_p < 1.0) {
            return Err(Error::InvalidArgument("bernoulli_p must lie in (0, 1)".into()));
        }
        if self.setup == Setup::Separable && self.m < self.r {
            return Err(Error::InvalidArgument("separable setup needs m >= r".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub d: DenseMatrix,
    pub t_star: BinaryMatrix,
    pub a_star: DenseMatrix,
}

pub(crate) fn bernoulli_matrix<R: Rng>(rng: &mut R, m: usize, r: usize, p: impl Fn(usize) -> f64) -> BinaryMatrix {
    let mut t = BinaryMatrix::zeros(m, r);
    for k in 0..r {
        let pk = p(k);
        for i in 0..m {
            if rng.random::<f64>() < pk {
                t.set(i, k, true);
            }
        }
    }
    t
}

/// `r x n` matrix with columns uniform on the probability simplex.
pub(crate) fn simplex_columns<R: Rng>(rng: &mut R, r: usize, n: usize) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(r, n);
    for j in 0..n {
        let mut total = 0.0;
        for k in 0..r {
            let e: f64 = Exp1.sample(rng);
            a[(k, j)] = e;
            total += e;
        }
        for k in 0..r {
            a[(k, j)] /= total;
        }
    }
    a
}

fn separable<R: Rng>(rng: &mut R, m: usize, r: usize, p: f64) -> BinaryMatrix {
    let top = bernoulli_matrix(rng, m - r, r, |_| p);
    let mut rows: Vec<usize> = (0..m).collect();
    rows.shuffle(rng);
    let mut t = BinaryMatrix::zeros(m, r);
    for (src, &dst) in rows.iter().enumerate() {
        for k in 0..r {
            let v = if src < m - r { top.get(src, k) } else { src - (m - r) == k };
            t.set(dst, k, v);
        }
    }
    t
}

/// `D = T* A* + α E` for trial `trial` of the configuration.
///
/// `T*`, `A*` and `E` are drawn in that order from the trial's substream, so
/// the noise-free part is shared by every noise level.
pub fn gen_synthetic(cfg: &ExperimentConfig, trial: u64) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, trial);
    let (m, r, n) = (cfg.m, cfg.r, cfg.n);
    let half = r.div_ceil(2);
    let t_star = match cfg.setup {
        Setup::T05 | Setup::T05Adense => bernoulli_matrix(&mut rng, m, r, |_| cfg.bernoulli_p),
        Setup::TsparseDense => bernoulli_matrix(&mut rng, m, r, |k| if k < half { 0.1 } else { 0.9 }),
        Setup::Separable => separable(&mut rng, m, r, cfg.bernoulli_p),
    };
    let mut a_star = simplex_columns(&mut rng, r, n);
    if cfg.setup == Setup::T05Adense {
        let cap = 2.0 / r as f64;
        for j in 0..n {
            let col: DVector<f64> = a_star.column(j).into_owned();
            a_star.set_column(j, &project_capped_simplex(&col, cap));
        }
    }
    let mut d = t_star.to_dense() * &a_star;
    for j in 0..n {
        for i in 0..m {
            let e: f64 = StandardNormal.sample(&mut rng);
            d[(i, j)] += cfg.noise_alpha * e;
        }
    }
    Ok(SyntheticData { d, t_star, a_star })
}

/// Methylation-like data: `D = (lo + (hi - lo) T*) A* + α E` with `T*`
/// Bernoulli(0.5), simplex columns in `A*`, clipped to `[0, 1]`.
pub fn methylation_like(m: usize, n: usize, r: usize, alpha: f64, levels: (f64, f64), seed: u64) -> SyntheticData {
    let mut rng = rng::stream(seed, 0);
    let t_star = bernoulli_matrix(&mut rng, m, r, |_| 0.5);
    let a_star = simplex_columns(&mut rng, r, n);
    let mut d = t_star.to_levels(levels.0, levels.1) * &a_star;
    for j in 0..n {
        for i in 0..m {
            let e: f64 = StandardNormal.sample(&mut rng);
            d[(i, j)] = (d[(i, j)] + alpha * e).clamp(0.0, 1.0);
        }
    }
    SyntheticData { d, t_star, a_star }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(setup: Setup) -> ExperimentConfig {
        ExperimentConfig {
            setup,
            m: 40,
            r: 4,
            n: 8,
            noise_alpha: 0.0,
            bernoulli_p: 0.5,
            trials: 1,
            seed: 11,
        }
    }

    #[test]
    fn zero_noise_is_exact_product() {
        let data = gen_synthetic(&cfg(Setup::T05), 0).unwrap();
        assert_eq!(data.d, data.t_star.to_dense() * &data.a_star);
        for j in 0..data.a_star.ncols() {
            assert!((data.a_star.column(j).sum() - 1.0).abs() < 1e-12);
            assert!(data.a_star.column(j).iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn reproducible_per_trial() {
        let c = cfg(Setup::T05);
        let a = gen_synthetic(&c, 3).unwrap();
        let b = gen_synthetic(&c, 3).unwrap();
        assert_eq!(a.d, b.d);
        assert_ne!(a.t_star, gen_synthetic(&c, 4).unwrap().t_star);
    }

    #[test]
    fn separable_contains_identity_rows() {
        let data = gen_synthetic(&cfg(Setup::Separable), 0).unwrap();
        for k in 0..4 {
            let unit = 1u64 << k;
            assert!((0..40).any(|i| data.t_star.row_code(i) == unit), "no anchor row for column {k}");
        }
    }

    #[test]
    fn dense_mixing_is_capped() {
        let data = gen_synthetic(&cfg(Setup::T05Adense), 0).unwrap();
        assert!(data.a_star.iter().all(|&x| x <= 0.5 + 1e-12 && x >= 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg(Setup::T05);
        c.n = 2;
        assert!(gen_synthetic(&c, 0).is_err());
        let mut c = cfg(Setup::T05);
        c.bernoulli_p = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn setup_names_parse() {
        for s in [Setup::T05, Setup::TsparseDense, Setup::T05Adense, Setup::Separable] {
            assert_eq!(s.name().parse::<Setup>().unwrap(), s);
        }
        assert_eq!("T0.5,Adense".parse::<Setup>().unwrap(), Setup::T05Adense);
    }
}
