use super::{check_tau, project_htau, CmsvEstimate, Direction};
use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix};
use crate::operator::MeasurementOperator;
use crate::rng::{streams, SeedStream};

/// Largest `n1 * n2` accepted by the brute-force oracle.
pub const BRUTE_FORCE_MAX_ENTRIES: usize = 9;

const MIN_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteForceOptions {
    pub samples: usize,
    pub seed: u64,
    /// Operator evaluations spent on local search around the best sample.
    /// Zero keeps the result a function of the sample set alone.
    pub refine_evals: usize,
}

/// Sampling oracle for `rho_tau^min` / `rho_tau^max` on tiny shapes.
///
/// Gaussian matrices are pushed through [`project_htau`] and evaluated; the
/// best one is then refined by an adaptive random local search. Uses no
/// gradient information, so it shares nothing with [`super::estimate_cmsv`]
/// beyond the retraction.
pub fn brute_force_cmsv(
    op: &MeasurementOperator,
    tau: f64,
    direction: Direction,
    samples: usize,
    seed: u64,
) -> Result<CmsvEstimate> {
    brute_force_cmsv_with(
        op,
        tau,
        direction,
        BruteForceOptions {
            samples,
            seed,
            refine_evals: 20_000,
        },
    )
}

pub fn brute_force_cmsv_with(
    op: &MeasurementOperator,
    tau: f64,
    direction: Direction,
    opts: BruteForceOptions,
) -> Result<CmsvEstimate> {
    let (n1, n2) = op.shape();
    if n1 * n2 > BRUTE_FORCE_MAX_ENTRIES {
        return Err(Error::Argument(format!(
            "brute force needs n1 * n2 <= {BRUTE_FORCE_MAX_ENTRIES}, got {n1} x {n2}"
        )));
    }
    if opts.samples < MIN_SAMPLES {
        return Err(Error::Argument(format!("brute force needs at least {MIN_SAMPLES} samples")));
    }
    check_tau(tau, op.shape())?;

    let mut rng = SeedStream::new(opts.seed, streams::ORACLE);
    let draw = |rng: &mut SeedStream| -> Result<DenseMatrix> {
        loop {
            let g = DenseMatrix::from_vec(n1, n2, rng.gaussian_vec(n1 * n2))?;
            if !g.is_zero() {
                return project_htau(&g, tau);
            }
        }
    };

    let mut best = draw(&mut rng)?;
    let mut best_val = norm2(&op.apply(&best)?);
    for _ in 1..opts.samples {
        let x = draw(&mut rng)?;
        let v = norm2(&op.apply(&x)?);
        if direction.improves(v, best_val) {
            best = x;
            best_val = v;
        }
    }

    let mut radius = 0.1;
    for _ in 0..opts.refine_evals {
        let mut trial = best.clone();
        trial.axpy(radius, &DenseMatrix::from_vec(n1, n2, rng.gaussian_vec(n1 * n2))?);
        if trial.is_zero() {
            continue;
        }
        let trial = project_htau(&trial, tau)?;
        let v = norm2(&op.apply(&trial)?);
        if direction.improves(v, best_val) {
            best = trial;
            best_val = v;
            radius = (radius * 1.5).min(1.0);
        } else {
            radius = (radius * 0.95).max(1e-9);
        }
    }

    let value = norm2(&op.apply(&best)?);
    Ok(CmsvEstimate {
        tau,
        direction,
        value,
        witness: best,
        starts: 1,
        per_start_values: vec![value],
        per_start_converged: vec![true],
        evidence: direction.evidence(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{draw_operator, EnsembleKind, EnsembleSpec};

    fn op_2x2(m: usize, seed: u64) -> MeasurementOperator {
        draw_operator(&EnsembleSpec {
            kind: EnsembleKind::Gaussian,
            n1: 2,
            n2: 2,
            m,
            seed,
            normalize: false,
        })
        .unwrap()
    }

    fn vectorized_extremes(op: &MeasurementOperator) -> (f64, f64) {
        let v = op.vectorized().to_nalgebra();
        let s = v.singular_values();
        let n = op.shape().0 * op.shape().1;
        let max = s.iter().cloned().fold(0.0, f64::max);
        // Fewer rows than unknowns leaves a null space.
        let min = if s.len() < n { 0.0 } else { s.iter().cloned().fold(f64::MAX, f64::min) };
        (min, max)
    }

    #[test]
    fn isometry() {
        let op = MeasurementOperator::orthonormal_basis(2, 2);
        for dir in [Direction::Min, Direction::Max] {
            let e = brute_force_cmsv(&op, 1.5, dir, 10_000, 1).unwrap();
            assert!((e.value - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn full_tau_matches_vectorized_svd() {
        for seed in 0..3 {
            let op = op_2x2(5, seed);
            let (lo, hi) = vectorized_extremes(&op);
            let min = brute_force_cmsv(&op, 2.0, Direction::Min, 20_000, seed).unwrap();
            let max = brute_force_cmsv(&op, 2.0, Direction::Max, 20_000, seed).unwrap();
            assert!((min.value - lo).abs() <= 0.01 * lo, "{} vs {lo}", min.value);
            assert!((max.value - hi).abs() <= 0.01 * hi, "{} vs {hi}", max.value);
        }
    }

    #[test]
    fn monotone_in_tau() {
        let op = op_2x2(3, 7);
        let run = |tau, dir| brute_force_cmsv(&op, tau, dir, 20_000, 3).unwrap().value;
        let mins: Vec<f64> = [1.0, 1.5, 2.0].iter().map(|&t| run(t, Direction::Min)).collect();
        let maxs: Vec<f64> = [1.0, 1.5, 2.0].iter().map(|&t| run(t, Direction::Max)).collect();
        for w in mins.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-3) + 1e-9, "{mins:?}");
        }
        for w in maxs.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-3), "{maxs:?}");
        }
    }

    #[test]
    fn rejects_large_shapes_and_few_samples() {
        let big = MeasurementOperator::orthonormal_basis(3, 4);
        assert!(brute_force_cmsv(&big, 1.0, Direction::Min, 10_000, 0).is_err());
        let small = MeasurementOperator::orthonormal_basis(2, 2);
        assert!(brute_force_cmsv(&small, 1.0, Direction::Min, 100, 0).is_err());
    }
}
