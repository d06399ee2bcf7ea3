//! Binary matrix factorization `D = T A` with `T ∈ {0,1}^{m×r}`: exact
//! recovery through hypercube vertex enumeration of the affine hull of the
//! data, approximate recovery for noisy data, and supporting benchmarks.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod factorize;
pub mod ilp;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod vertices;

pub use error::{Error, Result};
pub use factorize::{
    block_descent, factorize_approximate, factorize_exact, factorize_three_way, update_t_rows, AConstraint,
    ApproxConfig, ExactMode, ExactOptions, FactorModel, Refine,
};
pub use matrix::{BinaryMatrix, DenseMatrix};
pub use vertices::{find_vertices, find_vertices_affine, find_vertices_span, HullMode, Pruning, VertexOptions, VertexSet};
