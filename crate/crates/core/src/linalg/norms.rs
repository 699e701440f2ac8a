use super::matrix::DenseMatrix;
use super::svd::{svd, SvdFactors};
use crate::error::{Error, Result};

/// Default relative rank tolerance (relative to the largest singular value).
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Sum of singular values.
pub fn nuclear_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(svd(x)?.sigma.iter().sum())
}

pub fn frobenius_norm(x: &DenseMatrix) -> f64 {
    x.frobenius_sq().sqrt()
}

/// Largest singular value.
pub fn operator_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(svd(x)?.sigma[0])
}

/// Number of singular values strictly above `tol * sigma_1`; zero for the
/// zero matrix.
pub fn numerical_rank(x: &DenseMatrix, tol: f64) -> Result<usize> {
    if !(tol >= 0.0) {
        return Err(Error::Argument(format!("rank tolerance must be >= 0, got {tol}")));
    }
    Ok(rank_of_spectrum(&svd(x)?.sigma, tol))
}

pub(crate) fn rank_of_spectrum(sigma: &[f64], tol: f64) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * top).count()
}

/// l*-rank `||x||_*^2 / ||x||_F^2`, a scale-invariant surrogate for rank
/// taking values in `[1, min(n1, n2)]`. Undefined for the zero matrix.
pub fn lstar_rank(x: &DenseMatrix) -> Result<f64> {
    if x.is_zero() {
        return Err(Error::Domain("l*-rank is undefined for the zero matrix".into()));
    }
    Ok(lstar_rank_of_spectrum(&svd(x)?.sigma))
}

pub(crate) fn lstar_rank_of_spectrum(sigma: &[f64]) -> f64 {
    let l1: f64 = sigma.iter().sum();
    let l2sq: f64 = sigma.iter().map(|s| s * s).sum();
    l1 * l1 / l2sq
}

/// Singular value soft-thresholding: `argmin_Z 1/2 ||Z - x||_F^2 + threshold ||Z||_*`.
pub fn prox_nuclear(x: &DenseMatrix, threshold: f64) -> Result<DenseMatrix> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::Argument(format!("threshold must be finite and >= 0, got {threshold}")));
    }
    if threshold == 0.0 {
        return Ok(x.clone());
    }
    Ok(prox_nuclear_factored(&svd(x)?, threshold))
}

pub(crate) fn prox_nuclear_factored(f: &SvdFactors, threshold: f64) -> DenseMatrix {
    let shrunk: Vec<f64> = f.sigma.iter().map(|&s| (s - threshold).max(0.0)).collect();
    f.recompose_with(&shrunk)
}

/// Caps every singular value at `bound`: Euclidean projection onto the
/// operator-norm ball of radius `bound`.
pub fn clip_singular_values(x: &DenseMatrix, bound: f64) -> Result<DenseMatrix> {
    if !(bound >= 0.0) {
        return Err(Error::Argument(format!("bound must be >= 0, got {bound}")));
    }
    let f = svd(x)?;
    if f.sigma[0] <= bound {
        return Ok(x.clone());
    }
    let clipped: Vec<f64> = f.sigma.iter().map(|&s| s.min(bound)).collect();
    Ok(f.recompose_with(&clipped))
}

/// Split of an error matrix against the singular subspaces of a reference.
#[derive(Clone, Debug)]
pub struct ErrorDecomposition {
    /// Component touching the row or column space of the reference.
    pub h0: DenseMatrix,
    /// Component orthogonal to both singular subspaces of the reference.
    pub hc: DenseMatrix,
    /// Numerical rank of the reference used to select the subspaces.
    pub reference_rank: usize,
}

/// `hc = (I - U U^T) h (I - V V^T)` and `h0 = h - hc`, where `U`, `V` span the
/// column/row spaces of `x` (rank decided by `tol` relative to `sigma_1`).
///
/// Then `h = h0 + hc`, `rank(h0) <= 2 rank(x)`, `x hc^T = 0`, `x^T hc = 0`
/// and `<h0, hc> = 0`.
pub fn decompose_error(h: &DenseMatrix, x: &DenseMatrix, tol: f64) -> Result<ErrorDecomposition> {
    h.check_same_shape(x)?;
    let f = svd(x)?;
    let k = rank_of_spectrum(&f.sigma, tol);
    let Some(u) = f.u_leading(k) else {
        return Ok(ErrorDecomposition {
            h0: DenseMatrix::zeros(h.rows(), h.cols()),
            hc: h.clone(),
            reference_rank: 0,
        });
    };
    let v = f.v_leading(k).expect("k > 0");
    // (I - UU^T) h
    let left = h - &u.matmul(&u.tr_matmul(h)?)?;
    // ... (I - VV^T)
    let hc = &left - &left.matmul(&v)?.matmul_tr(&v)?;
    let h0 = h - &hc;
    Ok(ErrorDecomposition {
        h0,
        hc,
        reference_rank: k,
    })
}

/// True when `a b^T` and `a^T b` both vanish (relative tolerance 1e-8), the
/// condition under which `||a + b||_* = ||a||_* + ||b||_*`.
pub fn nuclear_additivity_check(a: &DenseMatrix, b: &DenseMatrix) -> Result<bool> {
    a.check_same_shape(b)?;
    let scale = (frobenius_norm(a) * frobenius_norm(b)).max(1.0);
    let tol = 1e-8 * scale;
    let abt = frobenius_norm(&a.matmul_tr(b)?);
    let atb = frobenius_norm(&a.tr_matmul(b)?);
    Ok(abt <= tol && atb <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = SeedStream::new(seed, 0);
        DenseMatrix::from_vec(rows, cols, s.gaussian_vec(rows * cols)).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn norms_of_simple_matrices() {
        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(nuclear_norm(&z).unwrap(), 0.0);
        assert_eq!(frobenius_norm(&z), 0.0);
        assert_eq!(operator_norm(&z).unwrap(), 0.0);
        assert_eq!(numerical_rank(&z, 1e-9).unwrap(), 0);

        let d = DenseMatrix::diag(&[3.0, 4.0]);
        assert!(close(frobenius_norm(&d), 5.0, 1e-15));
        assert!(close(operator_norm(&d).unwrap(), 4.0, 1e-15));
        assert_eq!(numerical_rank(&d, 1e-9).unwrap(), 2);
        assert!(close(nuclear_norm(&DenseMatrix::diag(&[2.0, 1.0])).unwrap(), 3.0, 1e-15));

        let u = [0.6, 0.8];
        let v = [1.0 / 3f64.sqrt(); 3];
        assert!(close(nuclear_norm(&DenseMatrix::outer(&u, &v)).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn lstar_rank_examples() {
        assert!(matches!(lstar_rank(&DenseMatrix::zeros(2, 2)), Err(Error::Domain(_))));
        let x = DenseMatrix::outer(&[1.0, -2.0, 0.5], &[3.0, 1.0]);
        assert!(close(lstar_rank(&x).unwrap(), 1.0, 1e-12));
        assert!(close(lstar_rank(&DenseMatrix::identity(5)).unwrap(), 5.0, 1e-12));
        let eps = 1e-6;
        let t = lstar_rank(&DenseMatrix::diag(&[1.0, eps])).unwrap();
        let expected = (1.0 + eps) * (1.0 + eps) / (1.0 + eps * eps);
        assert!(t > 1.0 && t < 1.0 + 1e-5);
        assert!(close(t, expected, 1e-12));
        let y = random_matrix(4, 6, 1);
        assert!(close(lstar_rank(&y).unwrap(), lstar_rank(&y.scaled(-3.7)).unwrap(), 1e-12));
    }

    #[test]
    fn prox_examples() {
        let x = random_matrix(3, 3, 2);
        assert_eq!(prox_nuclear(&x, 0.0).unwrap(), x);
        let p = prox_nuclear(&DenseMatrix::diag(&[3.0, 1.0]), 2.0).unwrap();
        assert!((&p - &DenseMatrix::diag(&[1.0, 0.0])).max_abs() < 1e-14);
        assert!(prox_nuclear(&x, -1.0).is_err());
    }

    #[test]
    fn clip_projects_onto_operator_ball() {
        let x = DenseMatrix::diag(&[3.0, 0.5]);
        let c = clip_singular_values(&x, 1.0).unwrap();
        assert!((&c - &DenseMatrix::diag(&[1.0, 0.5])).max_abs() < 1e-14);
    }

    #[test]
    fn decomposition_edge_cases() {
        let h = random_matrix(4, 4, 3);
        let d = decompose_error(&h, &DenseMatrix::zeros(4, 4), 1e-9).unwrap();
        assert_eq!(d.hc, h);
        assert!(d.h0.is_zero());

        // h lives inside the singular subspaces of x
        let x = DenseMatrix::diag(&[2.0, 1.0, 0.0, 0.0]);
        let mut h = DenseMatrix::zeros(4, 4);
        h[(0, 1)] = 0.3;
        h[(1, 0)] = -1.2;
        h[(1, 1)] = 0.7;
        let d = decompose_error(&h, &x, 1e-9).unwrap();
        assert!(d.hc.max_abs() < 1e-15);
        assert!((&d.h0 - &h).max_abs() < 1e-15);

        assert!(matches!(
            decompose_error(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(3, 2), 1e-9),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn additivity_examples() {
        let a = DenseMatrix::diag(&[1.0, 0.0]);
        let b = DenseMatrix::diag(&[0.0, 1.0]);
        assert!(nuclear_additivity_check(&a, &b).unwrap());
        assert!(close(nuclear_norm(&(&a + &b)).unwrap(), 2.0, 1e-15));
        assert!(!nuclear_additivity_check(&a, &a).unwrap());
        assert!(nuclear_additivity_check(&a, &DenseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn hc_is_additive_against_reference() {
        let l = random_matrix(6, 2, 4);
        let r = random_matrix(2, 6, 5);
        let x = l.matmul(&r).unwrap();
        let h = random_matrix(6, 6, 6);
        let d = decompose_error(&h, &x, 1e-9).unwrap();
        assert!(nuclear_additivity_check(&x, &d.hc).unwrap());
        let lhs = nuclear_norm(&(&x + &d.hc)).unwrap();
        let rhs = nuclear_norm(&x).unwrap() + nuclear_norm(&d.hc).unwrap();
        assert!(close(lhs, rhs, 1e-8));
    }
}
