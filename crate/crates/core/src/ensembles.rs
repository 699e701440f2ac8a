//! Seeded isotropic subgaussian operator ensembles, noise and low-rank signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::operator::MeasurementOperator;
use crate::rng::{streams, SeedStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    /// i.i.d. N(0, 1) entries.
    Gaussian,
    /// i.i.d. equiprobable +-1 entries.
    Rademacher,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// Divide every entry by `sqrt(m)`.
    #[serde(default)]
    pub normalize: bool,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.m == 0 {
            return Err(Error::Argument(format!(
                "ensemble dimensions must be positive (n1={}, n2={}, m={})",
                self.n1, self.n2, self.m
            )));
        }
        Ok(())
    }
}

/// Draws `m` matrices with i.i.d. entries from the requested ensemble. The
/// matrices are filled in order, row-major, from a single stream.
pub fn draw_operator(spec: &EnsembleSpec) -> Result<MeasurementOperator> {
    spec.validate()?;
    let mut s = SeedStream::new(spec.seed, streams::OPERATOR);
    let len = spec.n1 * spec.n2;
    let norm = (spec.m as f64).sqrt();
    let matrices = (0..spec.m)
        .map(|_| {
            let mut data: Vec<f64> = match spec.kind {
                EnsembleKind::Gaussian => s.gaussian_vec(len),
                EnsembleKind::Rademacher => (0..len).map(|_| s.sign()).collect(),
            };
            if spec.normalize {
                data.iter_mut().for_each(|v| *v /= norm);
            }
            DenseMatrix::from_vec(spec.n1, spec.n2, data)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementOperator::new(matrices)
}

/// `m` i.i.d. N(0, sigma^2) samples.
pub fn draw_gaussian_noise(m: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let mut s = SeedStream::new(seed, streams::NOISE);
    Ok((0..m).map(|_| sigma * s.gaussian()).collect())
}

/// `X = L R^T` with Gaussian factors of inner dimension `r`, rescaled so that
/// `||X||_F = scale`.
pub fn draw_low_rank_signal(n1: usize, n2: usize, r: usize, scale: f64, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > n1.min(n2) {
        return Err(Error::Argument(format!(
            "rank {r} outside [1, {}] for a {n1}x{n2} signal",
            n1.min(n2)
        )));
    }
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::Argument(format!("scale must be finite and >= 0, got {scale}")));
    }
    let mut s = SeedStream::new(seed, streams::SIGNAL);
    let l = DenseMatrix::from_vec(n1, r, s.gaussian_vec(n1 * r))?;
    let rt = DenseMatrix::from_vec(n2, r, s.gaussian_vec(n2 * r))?;
    let x = l.matmul_tr(&rt)?;
    let f = x.frobenius_sq().sqrt();
    Ok(x.scaled(scale / f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lstar_rank, numerical_rank};

    fn spec(kind: EnsembleKind, n1: usize, n2: usize, m: usize, seed: u64, normalize: bool) -> EnsembleSpec {
        EnsembleSpec {
            kind,
            n1,
            n2,
            m,
            seed,
            normalize,
        }
    }

    #[test]
    fn operator_is_seed_deterministic() {
        let s = spec(EnsembleKind::Gaussian, 3, 4, 5, 42, false);
        assert_eq!(draw_operator(&s).unwrap(), draw_operator(&s).unwrap());
        let t = spec(EnsembleKind::Gaussian, 3, 4, 5, 43, false);
        assert_ne!(draw_operator(&s).unwrap(), draw_operator(&t).unwrap());
    }

    #[test]
    fn distinct_seeds_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for seed in 0..200 {
            let op = draw_operator(&spec(EnsembleKind::Rademacher, 2, 2, 4, seed, false)).unwrap();
            let key: Vec<i8> = op.vectorized().as_slice().iter().map(|&v| v as i8).collect();
            seen.insert(key);
        }
        // 2^16 equally likely patterns; 200 draws collide with prob ~0.26, so
        // require near-uniqueness rather than strict uniqueness.
        assert!(seen.len() >= 197);
        let g1 = draw_operator(&spec(EnsembleKind::Gaussian, 4, 4, 8, 1, false)).unwrap();
        let g2 = draw_operator(&spec(EnsembleKind::Gaussian, 4, 4, 8, 2, false)).unwrap();
        assert!(g1.matrices().iter().zip(g2.matrices()).all(|(a, b)| a != b));
    }

    #[test]
    fn rademacher_entries_normalized() {
        let m = 16;
        let op = draw_operator(&spec(EnsembleKind::Rademacher, 3, 3, m, 5, true)).unwrap();
        let v = 1.0 / (m as f64).sqrt();
        assert!(op.vectorized().as_slice().iter().all(|&e| e == v || e == -v));
    }

    #[test]
    fn gaussian_entry_moments() {
        let op = draw_operator(&spec(EnsembleKind::Gaussian, 8, 8, 512, 6, false)).unwrap();
        let entries = op.vectorized().into_vec();
        let n = entries.len() as f64;
        let mean = entries.iter().sum::<f64>() / n;
        let var = entries.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "variance {var}");
    }

    #[test]
    fn isotropy_of_measurements() {
        // E <vec(A_k), vec(X)>^2 = ||X||_F^2 = 1 for unit X.
        let x = draw_low_rank_signal(4, 5, 2, 1.0, 77).unwrap();
        for kind in [EnsembleKind::Gaussian, EnsembleKind::Rademacher] {
            let mut acc = 0.0;
            let mut count = 0usize;
            for trial in 0..100 {
                let op = draw_operator(&spec(kind, 4, 5, 1000, 1000 + trial, false)).unwrap();
                for v in op.apply(&x).unwrap() {
                    acc += v * v;
                    count += 1;
                }
            }
            assert!(count >= 100_000);
            let mean = acc / count as f64;
            assert!((mean - 1.0).abs() <= 0.05, "{kind:?}: {mean}");
        }
    }

    #[test]
    fn noise_examples() {
        assert_eq!(draw_gaussian_noise(5, 0.0, 1).unwrap(), vec![0.0; 5]);
        assert_eq!(draw_gaussian_noise(5, 1.0, 1).unwrap(), draw_gaussian_noise(5, 1.0, 1).unwrap());
        let w = draw_gaussian_noise(10_000, 2.0, 9).unwrap();
        let mean = w.iter().sum::<f64>() / 1e4;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9999.0;
        assert!((3.8..=4.2).contains(&var), "variance {var}");
        assert!(draw_gaussian_noise(3, -1.0, 0).is_err());
    }

    #[test]
    fn low_rank_signal_examples() {
        let x = draw_low_rank_signal(5, 7, 1, 2.0, 1).unwrap();
        assert!((lstar_rank(&x).unwrap() - 1.0).abs() < 1e-9);
        for seed in 0..50 {
            let r = 1 + (seed as usize % 4);
            let x = draw_low_rank_signal(6, 8, r, 3.0, seed).unwrap();
            assert_eq!(numerical_rank(&x, 1e-9).unwrap(), r);
            assert!((x.frobenius_sq().sqrt() - 3.0).abs() < 1e-12);
        }
        assert!(draw_low_rank_signal(3, 3, 0, 1.0, 0).is_err());
        assert!(draw_low_rank_signal(3, 3, 4, 1.0, 0).is_err());
    }
}
