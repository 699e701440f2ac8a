//! Convex recovery programs.
//!
//! * matrix Basis Pursuit: `min ||Z||_*  s.t. ||y - A(Z)||_2 <= epsilon`
//!   ([`solve_mbp`], linearized ADMM);
//! * matrix Dantzig Selector: `min ||Z||_*  s.t. ||A^*(y - A(Z))||_2 <= lambda`
//!   ([`solve_mds`], linearized ADMM);
//! * matrix LASSO: `min 1/2 ||y - A(Z)||_2^2 + mu ||Z||_*`
//!   ([`solve_mlasso`], FISTA with adaptive restart).
//!
//! Every solver first rescales the problem so that the operator has unit
//! norm and the data has unit size, solves, and maps the estimate back. The
//! returned [`RecoveryResult`] reports feasibility and convergence honestly
//! rather than failing: Monte Carlo drivers count failures.

mod admm;
mod fista;

use serde::{Deserialize, Serialize};

pub use admm::{solve_mbp, solve_mds};
pub use fista::{lasso_certificate, solve_mlasso, LassoCertificate};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::operator::MeasurementOperator;
use crate::rng::{streams, SeedStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepRule {
    /// Step `t / L` where `L` is the Gram operator norm.
    Fixed { t: f64 },
    /// Start at `t0 / L` and shrink by `beta` until the quadratic upper bound
    /// holds (FISTA only; ADMM uses the fixed rule with `t = t0`).
    Backtracking { beta: f64, t0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub step_rule: StepRule,
    pub admm_rho: f64,
    /// Adapt the ADMM penalty to keep primal and dual residuals balanced.
    pub residual_balancing: bool,
    /// Record a history entry every this many iterations (0 disables).
    pub history_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            step_rule: StepRule::Fixed { t: 1.0 },
            admm_rho: 1.0,
            residual_balancing: false,
            history_every: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Argument("solver tolerances must be positive".into()));
        }
        if !(self.admm_rho > 0.0) {
            return Err(Error::Argument("admm_rho must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be positive".into()));
        }
        match self.step_rule {
            StepRule::Fixed { t } if !(t > 0.0 && t <= 1.0) => {
                Err(Error::Argument(format!("fixed step multiple must lie in (0, 1], got {t}")))
            }
            StepRule::Backtracking { beta, t0 } if !(beta > 0.0 && beta < 1.0 && t0 > 0.0) => {
                Err(Error::Argument("backtracking needs 0 < beta < 1 and t0 > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn step_multiple(&self) -> f64 {
        match self.step_rule {
            StepRule::Fixed { t } => t,
            StepRule::Backtracking { t0, .. } => t0.min(1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_hat: DenseMatrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Program objective at `x_hat` in the caller's units.
    pub objective: f64,
    /// The program's constraint holds at `x_hat` to `abs_tol`.
    pub feasible: bool,
    /// Stopping criteria met before `max_iters`.
    pub converged: bool,
    pub diagnostic: Option<String>,
    pub history: Vec<HistoryEntry>,
}

impl RecoveryResult {
    pub(crate) fn trivial(x_hat: DenseMatrix, objective: f64, feasible: bool, note: &str) -> Self {
        RecoveryResult {
            x_hat,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective,
            feasible,
            converged: feasible,
            diagnostic: Some(note.to_string()),
            history: Vec::new(),
        }
    }
}

/// `lambda_max(A^* A)` by power iteration on [`MeasurementOperator::gram_apply`]
/// from a fixed seeded start. Equals the squared unconstrained maximal
/// singular value `sup_{||X||_F = 1} ||A(X)||_2^2`.
pub fn power_iteration_gram_norm(op: &MeasurementOperator, tol: f64, max_iters: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let (n1, n2) = op.shape();
    let mut s = SeedStream::new(0, streams::POWER_ITERATION);
    let mut x = DenseMatrix::from_vec(n1, n2, s.gaussian_vec(n1 * n2))?;
    let nx = x.frobenius_sq().sqrt();
    x = x.scaled(1.0 / nx);
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let gx = op.gram_apply(&x)?;
        let next = x.inner(&gx)?;
        let ng = gx.frobenius_sq().sqrt();
        if ng == 0.0 {
            return Ok(0.0);
        }
        x = gx.scaled(1.0 / ng);
        if (next - lambda).abs() <= tol * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numerical(format!(
        "power iteration did not reach relative tolerance {tol} in {max_iters} iterations (last estimate {lambda})"
    )))
}

/// Gram norm for step sizes: a tight power-iteration estimate, falling back
/// to the always-valid upper bound `sum_k ||A_k||_F^2`.
pub(crate) fn gram_norm_for_steps(op: &MeasurementOperator) -> f64 {
    match power_iteration_gram_norm(op, 1e-12, 20_000) {
        Ok(l) => l * (1.0 + 1e-9),
        Err(_) => op.matrices().iter().map(DenseMatrix::frobenius_sq).sum(),
    }
}
