//! Low-rank matrix recovery by nuclear-norm minimization.
//!
//! The crate provides
//!
//! * dense matrix primitives ([`linalg`]): SVD, matrix norms, the l*-rank
//!   `tau(X) = ||X||_*^2 / ||X||_F^2`, singular value thresholding and the
//!   error decomposition used by cone arguments;
//! * linear measurement operators `A(X) = (<A_1, X>, ..., <A_m, X>)`
//!   ([`operator`]) and seeded random ensembles ([`ensembles`]);
//! * solvers for matrix Basis Pursuit, the matrix Dantzig Selector and the
//!   matrix LASSO ([`solvers`]);
//! * estimators for l*-constrained and rank-constrained singular values of an
//!   operator ([`cmsv`]);
//! * closed-form stability bounds and their empirical checks ([`bounds`]);
//! * experiment drivers behind the `lstar` command line tool ([`experiment`]).

pub mod bounds;
pub mod cmsv;
pub mod ensembles;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod operator;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use operator::MeasurementOperator;

/// Library version embedded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
