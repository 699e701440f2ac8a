use lstar::ensembles::{draw_operator, EnsembleKind, EnsembleSpec};
use lstar::experiment::ExperimentConfig;
use lstar::linalg::{lstar_rank, nuclear_norm, operator_norm, prox_nuclear, singular_values, svd};
use lstar::DenseMatrix;
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DenseMatrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |d| DenseMatrix::from_vec(r, c, d).unwrap())
    })
}

fn spec(kind: EnsembleKind, seed: u64) -> EnsembleSpec {
    EnsembleSpec { kind, n1: 3, n2: 4, m: 7, seed, normalize: true }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(x in matrix()) {
        let f = svd(&x).unwrap();
        let back = f.reconstruct();
        let mut d = back.clone();
        d.axpy(-1.0, &x);
        prop_assert!(d.max_abs() <= 1e-10 * (1.0 + x.max_abs()));
        prop_assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn norm_ordering_and_rank_range(x in matrix()) {
        prop_assume!(x.max_abs() > 1e-6);
        let op = operator_norm(&x).unwrap();
        let fro = x.frobenius_sq().sqrt();
        let nuc = nuclear_norm(&x).unwrap();
        prop_assert!(op <= fro * (1.0 + 1e-12) && fro <= nuc * (1.0 + 1e-12));
        let tau = lstar_rank(&x).unwrap();
        let p = x.rows().min(x.cols()) as f64;
        prop_assert!(tau >= 1.0 - 1e-12 && tau <= p + 1e-12);
    }

    #[test]
    fn prox_shrinks_each_singular_value(x in matrix(), t in 0.0f64..2.0) {
        let s = singular_values(&x).unwrap();
        let z = singular_values(&prox_nuclear(&x, t).unwrap()).unwrap();
        for (a, b) in s.iter().zip(&z) {
            prop_assert!((b - (a - t).max(0.0)).abs() <= 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn adjoint_identity(seed in any::<u64>(), x in prop::collection::vec(-1.0f64..1.0, 12), z in prop::collection::vec(-1.0f64..1.0, 7)) {
        let a = draw_operator(&spec(EnsembleKind::Rademacher, seed)).unwrap();
        let x = DenseMatrix::from_vec(3, 4, x).unwrap();
        let ax = a.apply(&x).unwrap();
        let lhs: f64 = ax.iter().zip(&z).map(|(p, q)| p * q).sum();
        let rhs = x.inner(&a.adjoint(&z).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn operators_are_reproducible_from_seed() {
    let a = draw_operator(&spec(EnsembleKind::Gaussian, 11)).unwrap();
    let b = draw_operator(&spec(EnsembleKind::Gaussian, 11)).unwrap();
    let c = draw_operator(&spec(EnsembleKind::Gaussian, 12)).unwrap();
    assert_eq!(a.distance(&b).unwrap(), 0.0);
    assert!(a.distance(&c).unwrap() > 0.0);
}

#[test]
fn config_hash_ignores_output_path() {
    let base = r#"{"kind": "cmsv", "ensemble": {"kind": "gaussian", "n1": 2, "n2": 2, "m": 3}, "tau": 1.5"#;
    let a = ExperimentConfig::from_json(&format!("{base}}}")).unwrap();
    let b = ExperimentConfig::from_json(&format!("{base}, \"output_path\": \"elsewhere\"}}")).unwrap();
    let c = ExperimentConfig::from_json(&format!("{base}, \"seed\": 9}}")).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert!(ExperimentConfig::from_json(&format!("{base}, \"bogus\": 1}}")).is_err());
}
