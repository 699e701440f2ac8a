//! Dense matrix primitives: storage, SVD, matrix norms, l*-rank, the nuclear
//! norm proximal map and the error-matrix decomposition.

mod matrix;
mod norms;
mod svd;

pub use matrix::DenseMatrix;
pub(crate) use matrix::{dot, norm2};
pub use norms::{
    clip_singular_values, decompose_error, frobenius_norm, lstar_rank, nuclear_additivity_check,
    nuclear_norm, numerical_rank, operator_norm, prox_nuclear, ErrorDecomposition,
    DEFAULT_RANK_TOL,
};
pub(crate) use norms::prox_nuclear_factored;
pub use svd::{singular_values, svd, SvdFactors, JACOBI_MAX_DIM};
