//! Estimation of l*-constrained singular values
//!
//! ```text
//! rho_tau^min(A) = inf { ||A(X)||_2 : ||X||_F = 1, tau(X) <= tau }
//! rho_tau^max(A) = sup { ||A(X)||_2 : ||X||_F = 1, tau(X) <= tau }
//! ```
//!
//! and of their rank-constrained counterparts `nu_r^min`, `nu_r^max`.
//!
//! None of these quantities is computed exactly. Every estimate is the value
//! of the operator at an explicit feasible witness, so it is one-sided
//! evidence: an upper bound on a minimum or a lower bound on a maximum.

mod brute;
mod pgd;
mod rcsv;

use serde::{Deserialize, Serialize};

pub use brute::{brute_force_cmsv, brute_force_cmsv_with, BruteForceOptions, BRUTE_FORCE_MAX_ENTRIES};
pub use pgd::estimate_cmsv;
pub use rcsv::estimate_rcsv;

use crate::error::{Error, Result};
use crate::linalg::{norm2, svd, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    /// True when `candidate` improves on `incumbent` for this direction.
    #[inline]
    pub(crate) fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Min => candidate < incumbent,
            Direction::Max => candidate > incumbent,
        }
    }

    pub fn evidence(self) -> Evidence {
        match self {
            Direction::Min => Evidence::UpperBoundOnMin,
            Direction::Max => Evidence::LowerBoundOnMax,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    UpperBoundOnMin,
    LowerBoundOnMax,
}

/// Estimate of `rho_tau^min` or `rho_tau^max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmsvEstimate {
    pub tau: f64,
    pub direction: Direction,
    /// `||A(witness)||_2`.
    pub value: f64,
    /// Unit Frobenius norm, `tau(witness) <= tau`.
    pub witness: DenseMatrix,
    pub starts: usize,
    pub per_start_values: Vec<f64>,
    pub per_start_converged: Vec<bool>,
    pub evidence: Evidence,
}

/// Estimate of `nu_r^min` or `nu_r^max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcsvEstimate {
    pub r: usize,
    pub direction: Direction,
    pub value: f64,
    /// Unit Frobenius norm, rank at most `r`.
    pub witness: DenseMatrix,
    pub starts: usize,
    pub per_start_values: Vec<f64>,
    pub evidence: Evidence,
}

pub(crate) fn check_tau(tau: f64, shape: (usize, usize)) -> Result<()> {
    let p = shape.0.min(shape.1) as f64;
    if !(tau >= 1.0 && tau <= p) {
        return Err(Error::Argument(format!("tau = {tau} outside [1, {p}]")));
    }
    Ok(())
}

/// Retraction onto `H_tau = {X : ||X||_F = 1, ||X||_*^2 <= tau}` that keeps
/// the singular vectors of `x` and replaces its spectrum by the closest
/// feasible direction: `sigma / ||sigma||_2` when that is already feasible,
/// otherwise the normalized soft-thresholded spectrum whose l1/l2 ratio is
/// exactly `sqrt(tau)`, with the threshold found by bisection.
pub fn project_htau(x: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if x.is_zero() {
        return Err(Error::Domain("cannot project the zero matrix onto H_tau".into()));
    }
    check_tau(tau, x.shape())?;
    let f = svd(x)?;
    let s = project_spectrum(&f.sigma, tau);
    let out = f.recompose_with(&s);
    let nrm = out.frobenius_sq().sqrt();
    Ok(out.scaled(1.0 / nrm))
}

/// Nonnegative `s` with `||s||_2 = 1`, `||s||_1 <= sqrt(tau)` maximizing
/// alignment with a nonincreasing, nonnegative `sigma`.
pub(crate) fn project_spectrum(sigma: &[f64], tau: f64) -> Vec<f64> {
    let n = norm2(sigma);
    let unit: Vec<f64> = sigma.iter().map(|v| v / n).collect();
    let l1: f64 = unit.iter().sum();
    // Slack keeps the output feasible after recomposition round-off.
    let target = tau.sqrt() * (1.0 - 1e-13);
    if l1 * l1 <= tau * (1.0 - 1e-13) {
        return unit;
    }
    let top = sigma[0];
    let ties = sigma.iter().take_while(|&&v| v == top).count();
    if ties as f64 > target * target {
        return tie_spectrum(sigma.len(), ties, tau);
    }
    let ratio = |theta: f64| {
        let (mut l1, mut l2) = (0.0, 0.0);
        for &v in sigma {
            let d = (v - theta).max(0.0);
            l1 += d;
            l2 += d * d;
        }
        l1 / l2.sqrt()
    };
    // ratio is nonincreasing in theta; at the first value below the top block
    // only the tied block survives and the ratio is sqrt(ties) <= sqrt(tau).
    let (mut lo, mut hi) = (0.0, sigma[ties]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shrunk: Vec<f64> = sigma.iter().map(|&v| (v - hi).max(0.0)).collect();
    let nrm = norm2(&shrunk);
    shrunk.iter().map(|v| v / nrm).collect()
}

/// A `sigma` whose top `ties > tau` entries coincide: any unit vector on the
/// tied block with l1 norm `sqrt(tau)` is optimal. Uses one entry `a` and
/// `p - 1` entries `b` with `p = ceil(tau)`.
fn tie_spectrum(len: usize, ties: usize, tau: f64) -> Vec<f64> {
    let p = (tau.ceil() as usize).clamp(1, ties);
    let mut s = vec![0.0; len];
    if p == 1 {
        s[0] = 1.0;
        return s;
    }
    let pf = p as f64;
    let tau = tau * (1.0 - 1e-13);
    let a = (tau.sqrt() + ((pf - 1.0) * (pf - tau)).max(0.0).sqrt()) / pf;
    let b = (tau.sqrt() - a) / (pf - 1.0);
    s[0] = a;
    for v in s.iter_mut().take(p).skip(1) {
        *v = b.max(0.0);
    }
    let nrm = norm2(&s);
    s.iter_mut().for_each(|v| *v /= nrm);
    s
}

/// Upper bound on the restricted isometry constant from extreme singular
/// values: `max(|1 - rho_min^2|, |rho_max^2 - 1|)`. With `nu_r` inputs the
/// same expression is the constant `delta_r` itself.
pub fn mric_upper_bound(rho_min: f64, rho_max: f64) -> Result<f64> {
    if !(rho_min >= 0.0) || !rho_max.is_finite() {
        return Err(Error::Argument(format!("invalid singular values ({rho_min}, {rho_max})")));
    }
    // Estimates of equal quantities may cross by round-off.
    if rho_min > rho_max * (1.0 + 1e-12) {
        return Err(Error::Argument(format!("rho_min = {rho_min} exceeds rho_max = {rho_max}")));
    }
    Ok((1.0 - rho_min * rho_min).abs().max((rho_max * rho_max - 1.0).abs()))
}
