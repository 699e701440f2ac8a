//! Linear measurement operators `A: R^{n1 x n2} -> R^m` stored as a stack of
//! `m` matrices, `A(X)_k = <A_k, X>`, plus the measurement model
//! `y = A(X) + w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, DenseMatrix};
use crate::rng::{streams, SeedStream};

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOperator {
    n1: usize,
    n2: usize,
    matrices: Vec<DenseMatrix>,
}

impl MeasurementOperator {
    /// All matrices must share one shape and there must be at least one.
    pub fn new(matrices: Vec<DenseMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Argument("an operator needs at least one matrix".into()))?;
        let (n1, n2) = first.shape();
        if let Some((k, bad)) = matrices.iter().enumerate().find(|(_, a)| a.shape() != (n1, n2)) {
            return Err(Error::Shape(format!(
                "matrix {k} is {}x{}, expected {n1}x{n2}",
                bad.rows(),
                bad.cols()
            )));
        }
        Ok(MeasurementOperator { n1, n2, matrices })
    }

    /// The `n1 n2` standard basis matrices `E_ij` in row-major order; an
    /// isometry from the Frobenius norm onto `l2`.
    pub fn orthonormal_basis(n1: usize, n2: usize) -> Self {
        let matrices = (0..n1 * n2)
            .map(|k| {
                let mut e = DenseMatrix::zeros(n1, n2);
                e.as_mut_slice()[k] = 1.0;
                e
            })
            .collect();
        MeasurementOperator { n1, n2, matrices }
    }

    /// Operator whose `k`-th matrix is row `k` of `a` reshaped row-major.
    pub fn from_vectorized(a: &DenseMatrix, n1: usize, n2: usize) -> Result<Self> {
        if a.cols() != n1 * n2 {
            return Err(Error::Shape(format!(
                "vectorized operator has {} columns, expected {}",
                a.cols(),
                n1 * n2
            )));
        }
        let matrices = (0..a.rows())
            .map(|k| DenseMatrix::from_vec(n1, n2, a.row(k).to_vec()))
            .collect::<Result<Vec<_>>>()?;
        MeasurementOperator::new(matrices)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn matrices(&self) -> &[DenseMatrix] {
        &self.matrices
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != self.shape() {
            return Err(Error::Shape(format!(
                "operator acts on {}x{} matrices, got {}x{}",
                self.n1,
                self.n2,
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// `A(x)`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self
            .matrices
            .iter()
            .map(|a| dot(a.as_slice(), x.as_slice()))
            .collect())
    }

    /// `A^*(z) = sum_k z_k A_k`.
    pub fn adjoint(&self, z: &[f64]) -> Result<DenseMatrix> {
        if z.len() != self.m() {
            return Err(Error::Shape(format!(
                "adjoint expects a vector of length {}, got {}",
                self.m(),
                z.len()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n1, self.n2);
        for (a, &zk) in self.matrices.iter().zip(z) {
            if zk != 0.0 {
                out.axpy(zk, a);
            }
        }
        Ok(out)
    }

    /// `A^*(A(x))`.
    pub fn gram_apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let ax = self.apply(x)?;
        self.adjoint(&ax)
    }

    /// Operator with every matrix multiplied by `c`.
    pub fn scale(&self, c: f64) -> MeasurementOperator {
        MeasurementOperator {
            n1: self.n1,
            n2: self.n2,
            matrices: self.matrices.iter().map(|a| a.scaled(c)).collect(),
        }
    }

    /// The `m x (n1 n2)` matrix whose row `k` is `vec(A_k)` (row-major).
    pub fn vectorized(&self) -> DenseMatrix {
        let data: Vec<f64> = self.matrices.iter().flat_map(|a| a.as_slice().iter().copied()).collect();
        DenseMatrix::from_vec(self.m(), self.n1 * self.n2, data).expect("consistent shapes")
    }

    /// `(sum_k ||A_k - B_k||_F^2)^{1/2}`, the Frobenius distance between the
    /// vectorized operators.
    pub fn distance(&self, other: &MeasurementOperator) -> Result<f64> {
        if self.shape() != other.shape() || self.m() != other.m() {
            return Err(Error::Shape("operators differ in shape or length".into()));
        }
        Ok(self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| (a - b).frobenius_sq())
            .sum::<f64>()
            .sqrt())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&OperatorWire::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<OperatorWire>(s)?.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorWire {
    n1: usize,
    n2: usize,
    m: usize,
    matrices: Vec<Vec<f64>>,
}

impl From<&MeasurementOperator> for OperatorWire {
    fn from(op: &MeasurementOperator) -> Self {
        OperatorWire {
            n1: op.n1,
            n2: op.n2,
            m: op.m(),
            matrices: op.matrices.iter().map(|a| a.as_slice().to_vec()).collect(),
        }
    }
}

impl TryFrom<OperatorWire> for MeasurementOperator {
    type Error = Error;
    fn try_from(w: OperatorWire) -> Result<Self> {
        if w.matrices.len() != w.m {
            return Err(Error::Config(format!(
                "declared m = {} but {} matrices present",
                w.m,
                w.matrices.len()
            )));
        }
        let matrices = w
            .matrices
            .into_iter()
            .map(|data| DenseMatrix::from_vec(w.n1, w.n2, data))
            .collect::<Result<Vec<_>>>()?;
        MeasurementOperator::new(matrices)
    }
}

/// Noise model and its realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    /// Deterministic noise with `||w||_2 <= epsilon`.
    Bounded { epsilon: f64 },
    /// `w ~ N(0, sigma^2 I_m)`.
    Gaussian { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
    pub realized_w: Vec<f64>,
}

impl NoiseSpec {
    /// Draws a realization of length `m`. Bounded noise is placed on the sphere
    /// `||w||_2 = epsilon` in a uniformly random direction.
    pub fn realize(kind: NoiseKind, m: usize, seed: u64) -> Result<Self> {
        let realized_w = match kind {
            NoiseKind::None => vec![0.0; m],
            NoiseKind::Bounded { epsilon } => {
                if !(epsilon >= 0.0) || !epsilon.is_finite() {
                    return Err(Error::Argument(format!("epsilon must be >= 0, got {epsilon}")));
                }
                let mut s = SeedStream::new(seed, streams::NOISE);
                let g = s.gaussian_vec(m);
                let n = norm2(&g);
                if epsilon == 0.0 || n == 0.0 {
                    vec![0.0; m]
                } else {
                    // One ulp of shrinkage keeps the norm from rounding above epsilon.
                    let c = epsilon / n * (1.0 - f64::EPSILON);
                    g.iter().map(|v| v * c).collect()
                }
            }
            NoiseKind::Gaussian { sigma } => crate::ensembles::draw_gaussian_noise(m, sigma, seed)?,
        };
        Ok(NoiseSpec {
            kind,
            seed,
            realized_w,
        })
    }
}

/// `y = A(x_true) + w`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementScenario {
    pub operator: MeasurementOperator,
    pub x_true: DenseMatrix,
    pub noise: NoiseSpec,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl MeasurementScenario {
    pub fn new(operator: MeasurementOperator, x_true: DenseMatrix, noise: NoiseSpec, seed: u64) -> Result<Self> {
        if noise.realized_w.len() != operator.m() {
            return Err(Error::Shape(format!(
                "noise has length {}, operator has m = {}",
                noise.realized_w.len(),
                operator.m()
            )));
        }
        let mut y = operator.apply(&x_true)?;
        for (yk, wk) in y.iter_mut().zip(&noise.realized_w) {
            *yk += wk;
        }
        Ok(MeasurementScenario {
            operator,
            x_true,
            noise,
            y,
            seed,
        })
    }

    /// Scenario with externally supplied observations (no ground truth check).
    pub fn with_observations(operator: MeasurementOperator, y: Vec<f64>) -> Result<Self> {
        if y.len() != operator.m() {
            return Err(Error::Shape(format!("y has length {}, expected {}", y.len(), operator.m())));
        }
        let (n1, n2) = operator.shape();
        let m = operator.m();
        Ok(MeasurementScenario {
            operator,
            x_true: DenseMatrix::zeros(n1, n2),
            noise: NoiseSpec {
                kind: NoiseKind::None,
                seed: 0,
                realized_w: vec![0.0; m],
            },
            y,
            seed: 0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let op = OperatorWire::from(&self.operator);
        let wire = ScenarioWire {
            n1: op.n1,
            n2: op.n2,
            m: op.m,
            matrices: op.matrices,
            x_true: self.x_true.as_slice().to_vec(),
            y: self.y.clone(),
            noise: self.noise.clone(),
            seed: self.seed,
        };
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let w: ScenarioWire = serde_json::from_str(s)?;
        let operator: MeasurementOperator = OperatorWire {
            n1: w.n1,
            n2: w.n2,
            m: w.m,
            matrices: w.matrices,
        }
        .try_into()?;
        if w.y.len() != operator.m() || w.noise.realized_w.len() != operator.m() {
            return Err(Error::Config("y or realized noise length differs from m".into()));
        }
        Ok(MeasurementScenario {
            x_true: DenseMatrix::from_vec(w.n1, w.n2, w.x_true)?,
            operator,
            noise: w.noise,
            y: w.y,
            seed: w.seed,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioWire {
    n1: usize,
    n2: usize,
    m: usize,
    matrices: Vec<Vec<f64>>,
    x_true: Vec<f64>,
    y: Vec<f64>,
    noise: NoiseSpec,
    seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{draw_operator, EnsembleKind, EnsembleSpec};
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = SeedStream::new(seed, 99);
        DenseMatrix::from_vec(rows, cols, s.gaussian_vec(rows * cols)).unwrap()
    }

    fn gaussian_op(n1: usize, n2: usize, m: usize, seed: u64) -> MeasurementOperator {
        draw_operator(&EnsembleSpec {
            kind: EnsembleKind::Gaussian,
            n1,
            n2,
            m,
            seed,
            normalize: false,
        })
        .unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn apply_examples() {
        let op = gaussian_op(3, 2, 5, 1);
        assert_eq!(op.apply(&DenseMatrix::zeros(3, 2)).unwrap(), vec![0.0; 5]);
        let id = MeasurementOperator::new(vec![DenseMatrix::identity(2)]).unwrap();
        assert_eq!(id.apply(&DenseMatrix::diag(&[2.5, -1.0])).unwrap(), vec![1.5]);
        assert!(matches!(op.apply(&DenseMatrix::zeros(2, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn apply_matches_vectorized_product() {
        let op = gaussian_op(4, 3, 7, 2);
        let x = random_matrix(4, 3, 3);
        let v = op.vectorized();
        let vx = DenseMatrix::from_vec(12, 1, x.as_slice().to_vec()).unwrap();
        let expected = v.matmul(&vx).unwrap();
        for (a, b) in op.apply(&x).unwrap().iter().zip(expected.as_slice()) {
            assert!(rel_close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn adjoint_examples() {
        let op = gaussian_op(2, 3, 4, 4);
        assert!(op.adjoint(&[0.0; 4]).unwrap().is_zero());
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            assert_eq!(&op.adjoint(&e).unwrap(), &op.matrices()[k]);
        }
        assert!(op.adjoint(&[1.0; 3]).is_err());
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        for t in 0..50 {
            let op = gaussian_op(3, 4, 6, 100 + t);
            let x = random_matrix(3, 4, 200 + t);
            let z = SeedStream::new(300 + t, 0).gaussian_vec(6);
            let lhs = dot(&op.apply(&x).unwrap(), &z);
            let rhs = x.inner(&op.adjoint(&z).unwrap()).unwrap();
            assert!(rel_close(lhs, rhs, 1e-10));
        }
    }

    #[test]
    fn scale_examples() {
        let op = gaussian_op(2, 2, 9, 5);
        assert_eq!(op.scale(1.0), op);
        assert!(op.scale(0.0).matrices().iter().all(DenseMatrix::is_zero));
        let x = random_matrix(2, 2, 6);
        let c = 1.0 / 3.0;
        let a = norm2(&op.apply(&x).unwrap());
        let b = norm2(&op.scale(c).apply(&x).unwrap());
        assert!(rel_close(b, c * a, 1e-14));
    }

    #[test]
    fn gram_examples() {
        let op = gaussian_op(3, 3, 5, 7);
        assert!(op.gram_apply(&DenseMatrix::zeros(3, 3)).unwrap().is_zero());
        let x = random_matrix(3, 3, 8);
        let y = random_matrix(3, 3, 9);
        let gx = op.gram_apply(&x).unwrap();
        let ax = op.apply(&x).unwrap();
        assert!(rel_close(gx.inner(&x).unwrap(), dot(&ax, &ax), 1e-12));
        let lhs = gx.inner(&y).unwrap();
        let rhs = x.inner(&op.gram_apply(&y).unwrap()).unwrap();
        assert!(rel_close(lhs, rhs, 1e-12));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let op = gaussian_op(2, 3, 4, 10).scale(1.0 / 7.0);
        assert_eq!(MeasurementOperator::from_json(&op.to_json().unwrap()).unwrap(), op);

        let x = random_matrix(2, 3, 11);
        let noise = NoiseSpec::realize(NoiseKind::Gaussian { sigma: 0.3 }, 4, 12).unwrap();
        let sc = MeasurementScenario::new(op, x, noise, 13).unwrap();
        let back = MeasurementScenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back, sc);
        let v: serde_json::Value = serde_json::from_str(&sc.to_json().unwrap()).unwrap();
        for key in ["n1", "n2", "m", "matrices", "y", "noise", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn json_rejects_inconsistent_documents() {
        let bad = r#"{"n1":2,"n2":2,"m":2,"matrices":[[1,0,0,1]]}"#;
        assert!(MeasurementOperator::from_json(bad).is_err());
        let bad = r#"{"n1":2,"n2":2,"m":1,"matrices":[[1,0,0]]}"#;
        assert!(MeasurementOperator::from_json(bad).is_err());
    }

    #[test]
    fn bounded_noise_respects_radius() {
        for seed in 0..20 {
            let n = NoiseSpec::realize(NoiseKind::Bounded { epsilon: 0.25 }, 17, seed).unwrap();
            assert!(norm2(&n.realized_w) <= 0.25);
        }
        let g1 = NoiseSpec::realize(NoiseKind::Gaussian { sigma: 1.0 }, 8, 3).unwrap();
        let g2 = NoiseSpec::realize(NoiseKind::Gaussian { sigma: 1.0 }, 8, 3).unwrap();
        assert_eq!(g1, g2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn linearity_and_adjoint(seed in any::<u64>(), alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
            let op = gaussian_op(3, 2, 4, seed);
            let x = random_matrix(3, 2, seed.wrapping_add(1));
            let y = random_matrix(3, 2, seed.wrapping_add(2));
            let mut comb = x.scaled(alpha);
            comb.axpy(beta, &y);
            let lhs = op.apply(&comb).unwrap();
            let ax = op.apply(&x).unwrap();
            let ay = op.apply(&y).unwrap();
            let scale = norm2(&ax).max(norm2(&ay)).max(1.0) * (alpha.abs() + beta.abs()).max(1.0);
            for k in 0..4 {
                prop_assert!((lhs[k] - (alpha * ax[k] + beta * ay[k])).abs() <= 1e-10 * scale);
            }
            let z = SeedStream::new(seed, 7).gaussian_vec(4);
            let l = dot(&ax, &z);
            let r = x.inner(&op.adjoint(&z).unwrap()).unwrap();
            prop_assert!((l - r).abs() <= 1e-10 * l.abs().max(1.0));
        }
    }
}
