//! Thin singular value decomposition.
//!
//! Matrices whose larger side is at most [`JACOBI_MAX_DIM`] go through a
//! one-sided (Hestenes) Jacobi sweep, which is deterministic and accurate to
//! high relative precision. Larger inputs are handed to nalgebra's
//! bidiagonalization + implicit QR routine.

use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Largest dimension handled by the Jacobi path.
pub const JACOBI_MAX_DIM: usize = 64;

const MAX_SWEEPS: usize = 80;

/// `X = U diag(sigma) V^T` with `p = min(rows, cols)` columns in `U` and `V`
/// and `sigma` sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    /// `U diag(s) V^T` for an arbitrary replacement spectrum `s`.
    pub fn recompose_with(&self, s: &[f64]) -> DenseMatrix {
        assert_eq!(s.len(), self.sigma.len());
        let (n1, n2) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(n1, n2);
        for (k, &sk) in s.iter().enumerate() {
            if sk == 0.0 {
                continue;
            }
            for i in 0..n1 {
                let uik = self.u[(i, k)] * sk;
                if uik == 0.0 {
                    continue;
                }
                let row = &mut out.as_mut_slice()[i * n2..(i + 1) * n2];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += uik * self.v[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.recompose_with(&self.sigma)
    }

    /// First `k` left singular vectors as an `n1 x k` matrix.
    pub fn u_leading(&self, k: usize) -> Option<DenseMatrix> {
        leading_columns(&self.u, k)
    }

    pub fn v_leading(&self, k: usize) -> Option<DenseMatrix> {
        leading_columns(&self.v, k)
    }
}

fn leading_columns(m: &DenseMatrix, k: usize) -> Option<DenseMatrix> {
    if k == 0 {
        return None;
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| m.column(j)).collect();
    Some(DenseMatrix::from_columns(&cols))
}

/// Thin SVD of `x`.
pub fn svd(x: &DenseMatrix) -> Result<SvdFactors> {
    if !x.all_finite() {
        return Err(Error::Numerical("svd input contains non-finite entries".into()));
    }
    if x.rows().max(x.cols()) <= JACOBI_MAX_DIM {
        jacobi_svd(x)
    } else {
        bidiag_svd(x)
    }
}

/// Singular values only.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(svd(x)?.sigma)
}

fn jacobi_svd(x: &DenseMatrix) -> Result<SvdFactors> {
    if x.rows() >= x.cols() {
        jacobi_tall(x)
    } else {
        let t = jacobi_tall(&x.transpose())?;
        Ok(SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// One-sided Jacobi on the columns of a matrix with `rows >= cols`.
fn jacobi_tall(x: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = x.shape();
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| x.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let ortho_eps = (m as f64 * f64::EPSILON).max(1e-15);
    let scale_sq: f64 = a.iter().map(|c| dot(c, c)).fold(0.0, f64::max);
    // Columns this small carry no information above rounding of the largest.
    let negligible = scale_sq * f64::EPSILON * f64::EPSILON * 1e-4;
    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= ortho_eps * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = a.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut sigma = Vec::with_capacity(n);
    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        sigma.push(s);
        if s > f64::MIN_POSITIVE * 1e20 {
            u_cols.push(Some(a[j].iter().map(|&e| e / s).collect()));
        } else {
            u_cols.push(None);
        }
        v_cols.push(v[j].clone());
    }
    let u_cols = complete_orthonormal(m, u_cols);
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    Ok(SvdFactors {
        u: DenseMatrix::from_columns(&u_cols),
        sigma,
        v: DenseMatrix::from_columns(&v_cols),
    })
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(dim: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut out = Vec::with_capacity(cols.len());
    for c in cols {
        match c {
            Some(c) => out.push(c),
            None => {
                let mut best: Option<(f64, Vec<f64>)> = None;
                for e in 0..dim {
                    let mut w = vec![0.0; dim];
                    w[e] = 1.0;
                    for _ in 0..2 {
                        for b in &basis {
                            let proj = dot(&w, b);
                            for (wi, bi) in w.iter_mut().zip(b) {
                                *wi -= proj * bi;
                            }
                        }
                    }
                    let nrm = norm2(&w);
                    if best.as_ref().is_none_or(|(bn, _)| nrm > *bn) {
                        best = Some((nrm, w));
                    }
                }
                let (nrm, mut w) = best.expect("dimension is positive");
                w.iter_mut().for_each(|x| *x /= nrm);
                basis.push(w.clone());
                out.push(w);
            }
        }
    }
    out
}

fn bidiag_svd(x: &DenseMatrix) -> Result<SvdFactors> {
    let p = x.rows().min(x.cols());
    let dec = nalgebra::linalg::SVD::try_new(x.to_nalgebra(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("bidiagonal SVD did not converge".into()))?;
    let u = dec.u.ok_or_else(|| Error::Numerical("missing U factor".into()))?;
    let v_t = dec.v_t.ok_or_else(|| Error::Numerical("missing V factor".into()))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&k| dec.singular_values[k]).collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    let u_cols: Vec<Vec<f64>> = order.iter().map(|&k| u.column(k).iter().copied().collect()).collect();
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&k| v_t.row(k).iter().copied().collect()).collect();
    Ok(SvdFactors {
        u: DenseMatrix::from_columns(&u_cols),
        sigma,
        v: DenseMatrix::from_columns(&v_cols),
    })
}
