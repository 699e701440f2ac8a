use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{check_tau, project_htau, CmsvEstimate, Direction};
use crate::error::Result;
use crate::linalg::{norm2, DenseMatrix};
use crate::operator::MeasurementOperator;
use crate::rng::{streams, trial_seed, SeedStream};
use crate::solvers::{power_iteration_gram_norm, SolverConfig};

/// Multi-start projected gradient on `||A(X)||_2^2` over `H_tau`.
///
/// Each start draws a Gaussian matrix from its own seed (`seed ^ start`),
/// projects it onto `H_tau`, then iterates `X <- P(X -+ G(X) / L)` with
/// `G = A^* A` and `L = lambda_max(G)` (descent for `Min`, ascent for `Max`)
/// until `||A(X)||_2` changes by less than `rel_tol * ||A(X)||_2 +
/// abs_tol * sqrt(L)`. The step is
/// scale-equivariant: scaling `A` by `c` scales every reported value by `c`.
///
/// The best start wins, ties resolved towards the lowest start index.
pub fn estimate_cmsv(
    op: &MeasurementOperator,
    tau: f64,
    direction: Direction,
    starts: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CmsvEstimate> {
    check_tau(tau, op.shape())?;
    cfg.validate()?;
    let starts = starts.max(1);
    let lambda = match power_iteration_gram_norm(op, 1e-12, 20_000) {
        Ok(l) => l,
        Err(_) => op.matrices().iter().map(DenseMatrix::frobenius_sq).sum(),
    };

    let objective = Objective::new(op);
    let runs: Vec<(DenseMatrix, f64, bool)> = (0..starts)
        .into_par_iter()
        .map(|start| run_start(&objective, tau, direction, lambda, trial_seed(seed, start as u64), cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, run) in runs.iter().enumerate().skip(1) {
        if direction.improves(run.1, runs[best].1) {
            best = i;
        }
    }
    let witness = runs[best].0.clone();
    let value = norm2(&op.apply(&witness)?);
    Ok(CmsvEstimate {
        tau,
        direction,
        value,
        witness,
        starts,
        per_start_values: runs.iter().map(|r| r.1).collect(),
        per_start_converged: runs.iter().map(|r| r.2).collect(),
        evidence: direction.evidence(),
    })
}

/// `||A(X)||^2` and `A^* A (X)`, through the dense Gram matrix when that is
/// cheaper than the `m` measurement matrices.
enum Objective<'a> {
    Direct(&'a MeasurementOperator),
    Gram { shape: (usize, usize), g: DMatrix<f64> },
}

impl<'a> Objective<'a> {
    fn new(op: &'a MeasurementOperator) -> Self {
        let (n1, n2) = op.shape();
        if op.m() > n1 * n2 {
            let v = op.vectorized().to_nalgebra();
            Objective::Gram {
                shape: (n1, n2),
                g: v.transpose() * v,
            }
        } else {
            Objective::Direct(op)
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Objective::Direct(op) => op.shape(),
            Objective::Gram { shape, .. } => *shape,
        }
    }

    /// Returns `(||A(X)||^2, A^* A (X))`.
    fn eval(&self, x: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        match self {
            Objective::Direct(op) => {
                let ax = op.apply(x)?;
                Ok((sq_norm(&ax), op.adjoint(&ax)?))
            }
            Objective::Gram { shape, g } => {
                let v = DVector::from_column_slice(x.as_slice());
                let gv = g * &v;
                let f = v.dot(&gv).max(0.0);
                Ok((f, DenseMatrix::from_vec(shape.0, shape.1, gv.as_slice().to_vec())?))
            }
        }
    }
}

fn run_start(
    objective: &Objective,
    tau: f64,
    direction: Direction,
    lambda: f64,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<(DenseMatrix, f64, bool)> {
    let (n1, n2) = objective.shape();
    let mut rng = SeedStream::new(seed, streams::ESTIMATOR);
    let init = DenseMatrix::from_vec(n1, n2, rng.gaussian_vec(n1 * n2))?;
    let mut x = project_htau(&init, tau)?;
    let (mut f, mut grad) = objective.eval(&x)?;
    if lambda == 0.0 {
        return Ok((x, 0.0, true));
    }
    let sign = match direction {
        Direction::Min => -1.0,
        Direction::Max => 1.0,
    };
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let mut next = x.clone();
        next.axpy(sign / lambda, &grad);
        if next.is_zero() {
            // X lies in an eigenspace of G with eigenvalue L; it is already
            // optimal for the ascent and cannot move.
            converged = true;
            break;
        }
        let next = project_htau(&next, tau)?;
        let (f_next, grad_next) = objective.eval(&next)?;
        let change = (f_next.sqrt() - f.sqrt()).abs();
        // Keep the better point; the retraction is not guaranteed monotone.
        let improved = direction.improves(f_next, f);
        if improved || f_next == f {
            x = next;
            f = f_next;
            grad = grad_next;
        }
        if change <= cfg.rel_tol * f.sqrt() + cfg.abs_tol * lambda.sqrt() || !improved {
            converged = true;
            break;
        }
    }
    Ok((x, f.sqrt(), converged))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmsv::Evidence;
    use crate::ensembles::{draw_operator, EnsembleKind, EnsembleSpec};
    use crate::linalg::lstar_rank;

    fn cfg() -> SolverConfig {
        SolverConfig {
            max_iters: 2000,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn isometry_gives_one() {
        let op = MeasurementOperator::orthonormal_basis(3, 3);
        for dir in [Direction::Min, Direction::Max] {
            for tau in [1.0, 2.0, 3.0] {
                let e = estimate_cmsv(&op, tau, dir, 4, 1, &cfg()).unwrap();
                assert!((e.value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_null_space_is_found() {
        // Measurements <E_k, X> for every entry except (0, 0): the rank-one
        // matrix e_0 e_0^T is annihilated.
        let full = MeasurementOperator::orthonormal_basis(3, 3);
        let op = MeasurementOperator::new(full.matrices()[1..].to_vec()).unwrap();
        let e = estimate_cmsv(&op, 1.0, Direction::Min, 16, 2, &cfg()).unwrap();
        assert!(e.value < 1e-4, "{}", e.value);
        assert_eq!(e.evidence, Evidence::UpperBoundOnMin);
    }

    #[test]
    fn witness_is_feasible_and_value_recomputed() {
        let op = draw_operator(&EnsembleSpec {
            kind: EnsembleKind::Gaussian,
            n1: 4,
            n2: 5,
            m: 12,
            seed: 3,
            normalize: true,
        })
        .unwrap();
        for dir in [Direction::Min, Direction::Max] {
            let e = estimate_cmsv(&op, 1.7, dir, 6, 9, &cfg()).unwrap();
            assert!((e.witness.frobenius_sq().sqrt() - 1.0).abs() <= 1e-9);
            assert!(lstar_rank(&e.witness).unwrap() <= 1.7 * (1.0 + 1e-9));
            assert_eq!(e.value, norm2(&op.apply(&e.witness).unwrap()));
            assert_eq!(e.per_start_values.len(), 6);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let op = draw_operator(&EnsembleSpec {
            kind: EnsembleKind::Rademacher,
            n1: 3,
            n2: 3,
            m: 7,
            seed: 4,
            normalize: true,
        })
        .unwrap();
        let a = estimate_cmsv(&op, 2.0, Direction::Min, 8, 5, &cfg()).unwrap();
        let b = estimate_cmsv(&op, 2.0, Direction::Min, 8, 5, &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
