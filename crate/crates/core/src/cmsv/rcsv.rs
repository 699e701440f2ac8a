use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::{Direction, RcsvEstimate};
use crate::error::{Error, Result};
use crate::linalg::{norm2, svd, DenseMatrix};
use crate::operator::MeasurementOperator;
use crate::rng::{streams, trial_seed, SeedStream};
use crate::solvers::SolverConfig;

/// Alternating minimization for `nu_r^min` / `nu_r^max`.
///
/// The iterate is kept as `X = U_r S_r V_r^T`. With the right factor fixed
/// to the orthonormal `Q = V_r`, the problem over `X = L Q^T` with
/// `||L||_F = 1` is an extreme eigenvector problem for `M^T M`, where the
/// rows of `M` are `vec(A_k Q)`; the left step is symmetric. Both block
/// steps are exact, so the objective is monotone.
pub fn estimate_rcsv(
    op: &MeasurementOperator,
    r: usize,
    direction: Direction,
    starts: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<RcsvEstimate> {
    let (n1, n2) = op.shape();
    if r == 0 || r > n1.min(n2) {
        return Err(Error::Argument(format!("rank {r} outside [1, {}]", n1.min(n2))));
    }
    cfg.validate()?;
    let starts = starts.max(1);
    let runs: Vec<(DenseMatrix, f64)> = (0..starts)
        .into_par_iter()
        .map(|s| run_start(op, r, direction, trial_seed(seed, s as u64), cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if direction.improves(run.1, runs[best].1) {
            best = i;
        }
    }
    let witness = runs[best].0.clone();
    let value = norm2(&op.apply(&witness)?);
    Ok(RcsvEstimate {
        r,
        direction,
        value,
        witness,
        starts,
        per_start_values: runs.iter().map(|r| r.1).collect(),
        evidence: direction.evidence(),
    })
}

fn run_start(
    op: &MeasurementOperator,
    r: usize,
    direction: Direction,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<(DenseMatrix, f64)> {
    let (n1, n2) = op.shape();
    let mut rng = SeedStream::new(seed, streams::ESTIMATOR);
    let l = DenseMatrix::from_vec(n1, r, rng.gaussian_vec(n1 * r))?;
    let rt = DenseMatrix::from_vec(n2, r, rng.gaussian_vec(n2 * r))?;
    let mut x = l.matmul_tr(&rt)?;
    x = x.scaled(1.0 / x.frobenius_sq().sqrt());
    let mut f = sq_norm(&op.apply(&x)?);
    let scale: f64 = op.matrices().iter().map(DenseMatrix::frobenius_sq).sum();

    for _ in 0..cfg.max_iters {
        let f_start = f;
        for side in [Side::Left, Side::Right] {
            let factors = svd(&x)?;
            let q = match side {
                Side::Left => factors.v_leading(r),
                Side::Right => factors.u_leading(r),
            }
            .ok_or_else(|| Error::Numerical("missing singular vectors".into()))?;
            let next = block_step(op, &q, side, direction)?;
            let f_next = sq_norm(&op.apply(&next)?);
            if !direction.improves(f, f_next) {
                x = next;
                f = f_next;
            }
        }
        if (f - f_start).abs() <= cfg.rel_tol * f + cfg.abs_tol * scale {
            break;
        }
    }
    Ok((x, f.sqrt()))
}

#[derive(Clone, Copy)]
enum Side {
    /// Optimize `L` in `X = L Q^T`.
    Left,
    /// Optimize `R` in `X = Q R^T`.
    Right,
}

fn block_step(op: &MeasurementOperator, q: &DenseMatrix, side: Side, direction: Direction) -> Result<DenseMatrix> {
    let r = q.cols();
    let rows: Vec<DenseMatrix> = op
        .matrices()
        .iter()
        .map(|a| match side {
            Side::Left => a.matmul(q),
            Side::Right => a.tr_matmul(q),
        })
        .collect::<Result<_>>()?;
    let free = rows[0].rows();
    let k = free * r;
    let mut m = DMatrix::<f64>::zeros(rows.len(), k);
    for (i, b) in rows.iter().enumerate() {
        for (j, v) in b.as_slice().iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let eig = SymmetricEigen::new(m.transpose() * &m);
    let mut pick = 0;
    for i in 1..k {
        let better = match direction {
            Direction::Min => eig.eigenvalues[i] < eig.eigenvalues[pick],
            Direction::Max => eig.eigenvalues[i] > eig.eigenvalues[pick],
        };
        if better {
            pick = i;
        }
    }
    let vec: Vec<f64> = eig.eigenvectors.column(pick).iter().copied().collect();
    let factor = DenseMatrix::from_vec(free, r, vec)?;
    let x = match side {
        Side::Left => factor.matmul_tr(q)?,
        Side::Right => q.matmul_tr(&factor)?,
    };
    let n = x.frobenius_sq().sqrt();
    Ok(x.scaled(1.0 / n))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
