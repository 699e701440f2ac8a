//! Linearized ADMM for the two constrained programs.
//!
//! Both programs are written as `min ||Z||_* + indicator_C(W)` subject to
//! `M(Z) = W`, where `M` is `A` (Basis Pursuit, `C` a Euclidean ball around
//! `y`) or `A^* A` (Dantzig Selector, `C` an operator-norm ball around
//! `A^*(y)`). The `Z`-update linearizes the augmented term so it reduces to
//! singular value thresholding; the `W`-update is the exact projection onto
//! `C`. Iterations run on a copy of the problem in which `||M|| = 1` and the
//! data has unit size.

use super::{gram_norm_for_steps, HistoryEntry, RecoveryResult, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{clip_singular_values, dot, norm2, nuclear_norm, operator_norm, prox_nuclear, svd, DenseMatrix};
use crate::operator::{MeasurementOperator, MeasurementScenario};

/// Linear map `Z -> W` of the splitting with its adjoint.
trait Coupling {
    type W: Clone;
    fn forward(&self, z: &DenseMatrix) -> Result<Self::W>;
    fn adjoint(&self, w: &Self::W) -> Result<DenseMatrix>;
    fn project(&self, w: &Self::W) -> Result<Self::W>;
    fn sub(a: &Self::W, b: &Self::W) -> Self::W;
    fn add(a: &Self::W, b: &Self::W) -> Self::W;
    fn scale(a: &Self::W, c: f64) -> Self::W;
    fn norm(a: &Self::W) -> f64;
    fn dim(&self) -> usize;
    fn zero(&self) -> Self::W;
}

struct BallCoupling<'a> {
    op: &'a MeasurementOperator,
    center: Vec<f64>,
    radius: f64,
}

impl Coupling for BallCoupling<'_> {
    type W = Vec<f64>;
    fn forward(&self, z: &DenseMatrix) -> Result<Vec<f64>> {
        self.op.apply(z)
    }
    fn adjoint(&self, w: &Vec<f64>) -> Result<DenseMatrix> {
        self.op.adjoint(w)
    }
    fn project(&self, w: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(project_ball(w, &self.center, self.radius))
    }
    fn sub(a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
    fn add(a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn scale(a: &Vec<f64>, c: f64) -> Vec<f64> {
        a.iter().map(|x| x * c).collect()
    }
    fn norm(a: &Vec<f64>) -> f64 {
        norm2(a)
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn zero(&self) -> Vec<f64> {
        vec![0.0; self.center.len()]
    }
}

struct SpectralCoupling<'a> {
    op: &'a MeasurementOperator,
    center: DenseMatrix,
    radius: f64,
}

impl Coupling for SpectralCoupling<'_> {
    type W = DenseMatrix;
    fn forward(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        self.op.gram_apply(z)
    }
    fn adjoint(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        self.op.gram_apply(w)
    }
    fn project(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        // center - clip(center - w)
        let d = &self.center - w;
        Ok(&self.center - &clip_singular_values(&d, self.radius)?)
    }
    fn sub(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        a - b
    }
    fn add(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        a + b
    }
    fn scale(a: &DenseMatrix, c: f64) -> DenseMatrix {
        a.scaled(c)
    }
    fn norm(a: &DenseMatrix) -> f64 {
        a.frobenius_sq().sqrt()
    }
    fn dim(&self) -> usize {
        self.center.rows() * self.center.cols()
    }
    fn zero(&self) -> DenseMatrix {
        DenseMatrix::zeros(self.center.rows(), self.center.cols())
    }
}

fn project_ball(w: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d: Vec<f64> = w.iter().zip(center).map(|(a, c)| a - c).collect();
    let n = norm2(&d);
    if n <= radius {
        return w.to_vec();
    }
    let s = radius / n;
    center.iter().zip(&d).map(|(c, di)| c + s * di).collect()
}

struct AdmmOutcome {
    z: DenseMatrix,
    iterations: usize,
    primal: f64,
    dual: f64,
    converged: bool,
    history: Vec<(usize, f64, f64)>,
}

/// Runs linearized ADMM on `min ||Z||_* + I_C(W)  s.t. M(Z) = W` assuming
/// `||M|| <= 1`.
fn linearized_admm<C: Coupling>(coupling: &C, shape: (usize, usize), cfg: &SolverConfig) -> Result<AdmmOutcome> {
    let eta = cfg.step_multiple();
    let mut rho = cfg.admm_rho;
    let mut z = DenseMatrix::zeros(shape.0, shape.1);
    let mut mz = coupling.zero();
    let mut w = coupling.project(&mz)?;
    let mut u = coupling.zero();
    let sqrt_p = (coupling.dim() as f64).sqrt();
    let sqrt_n = ((shape.0 * shape.1) as f64).sqrt();
    let mut history = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for iter in 1..=cfg.max_iters {
        // Z-update: prox of ||.||_* at a gradient step on (rho/2)||M Z - W + U||^2.
        let r = C::add(&C::sub(&mz, &w), &u);
        let grad = coupling.adjoint(&r)?;
        let mut point = z.clone();
        point.axpy(-eta, &grad);
        let z_next = prox_nuclear(&point, eta / rho)?;
        let mz_next = coupling.forward(&z_next)?;

        let w_next = coupling.project(&C::add(&mz_next, &u))?;
        let primal_vec = C::sub(&mz_next, &w_next);
        let u_next = C::add(&u, &primal_vec);

        // Dual residual of the linearized scheme:
        // rho * (M^*M dZ - dZ / eta - M^* dW).
        let dz = &z_next - &z;
        let dw = C::sub(&w_next, &w);
        let mut s = coupling.adjoint(&C::sub(&coupling.forward(&dz)?, &dw))?;
        s.axpy(-1.0 / eta, &dz);
        primal = C::norm(&primal_vec);
        dual = rho * s.frobenius_sq().sqrt();

        let eps_pri = sqrt_p * cfg.abs_tol + cfg.rel_tol * C::norm(&mz_next).max(C::norm(&w_next));
        let eps_dual = sqrt_n * cfg.abs_tol + cfg.rel_tol * rho * coupling.adjoint(&u_next)?.frobenius_sq().sqrt();

        z = z_next;
        mz = mz_next;
        w = w_next;
        u = u_next;

        if cfg.history_every > 0 && iter % cfg.history_every == 0 {
            history.push((iter, nuclear_norm(&z)?, primal));
        }
        if primal <= eps_pri && dual <= eps_dual {
            return Ok(AdmmOutcome {
                z,
                iterations: iter,
                primal,
                dual,
                converged: true,
                history,
            });
        }
        if cfg.residual_balancing && iter % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u = C::scale(&u, 0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u = C::scale(&u, 2.0);
            }
        }
    }
    Ok(AdmmOutcome {
        z,
        iterations: cfg.max_iters,
        primal,
        dual,
        converged: false,
        history,
    })
}

fn check_scenario(sc: &MeasurementScenario) -> Result<()> {
    if sc.y.len() != sc.operator.m() {
        return Err(Error::Shape(format!(
            "y has length {} but the operator has m = {}",
            sc.y.len(),
            sc.operator.m()
        )));
    }
    Ok(())
}

fn residual_norm(op: &MeasurementOperator, y: &[f64], z: &DenseMatrix) -> Result<f64> {
    let az = op.apply(z)?;
    Ok(y.iter().zip(&az).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn dantzig_residual(op: &MeasurementOperator, y: &[f64], z: &DenseMatrix) -> Result<f64> {
    let az = op.apply(z)?;
    let r: Vec<f64> = y.iter().zip(&az).map(|(a, b)| a - b).collect();
    operator_norm(&op.adjoint(&r)?)
}

/// Matrix Basis Pursuit `min ||Z||_* s.t. ||y - A(Z)||_2 <= epsilon`.
pub fn solve_mbp(scenario: &MeasurementScenario, epsilon: f64, cfg: &SolverConfig) -> Result<RecoveryResult> {
    check_scenario(scenario)?;
    cfg.validate()?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let op = &scenario.operator;
    let (n1, n2) = op.shape();
    let y = &scenario.y;
    let y_norm = norm2(y);
    if y_norm <= epsilon {
        return Ok(RecoveryResult::trivial(
            DenseMatrix::zeros(n1, n2),
            0.0,
            true,
            "zero is feasible",
        ));
    }
    let gram = gram_norm_for_steps(op);
    if gram == 0.0 {
        return Ok(infeasible_zero(n1, n2, "operator is zero and ||y|| > epsilon"));
    }

    // A' = A / sqrt(L), data scaled to unit norm: Z = c Z'.
    let op_scale = 1.0 / gram.sqrt();
    let unit_op = op.scale(op_scale);
    let c = y_norm * op_scale;
    let center: Vec<f64> = y.iter().map(|v| v * op_scale / c).collect();
    let radius = epsilon * op_scale / c;
    let coupling = BallCoupling {
        op: &unit_op,
        center,
        radius,
    };
    let out = linearized_admm(&coupling, (n1, n2), cfg)?;
    let mut z = polish_ball(&unit_op, &coupling.center, radius, out.z)?;
    z = z.scaled(c);

    let res = residual_norm(op, y, &z)?;
    let feasible = res <= epsilon + cfg.abs_tol;
    let diagnostic = if out.converged {
        None
    } else if out.primal > 1e-3 {
        Some(format!(
            "primal residual {:.3e} after {} iterations; epsilon may be below dist(y, range(A))",
            out.primal, out.iterations
        ))
    } else {
        Some(format!("max_iters reached (primal {:.3e}, dual {:.3e})", out.primal, out.dual))
    };
    Ok(RecoveryResult {
        objective: nuclear_norm(&z)?,
        x_hat: z,
        iterations: out.iterations,
        primal_residual: out.primal,
        dual_residual: out.dual,
        feasible,
        converged: out.converged,
        diagnostic,
        history: scale_history(out.history, c),
    })
}

/// Matrix Dantzig Selector `min ||Z||_* s.t. ||A^*(y - A(Z))||_2 <= lambda`.
pub fn solve_mds(scenario: &MeasurementScenario, lambda: f64, cfg: &SolverConfig) -> Result<RecoveryResult> {
    check_scenario(scenario)?;
    cfg.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let op = &scenario.operator;
    let (n1, n2) = op.shape();
    let y = &scenario.y;
    let aty = op.adjoint(y)?;
    let aty_norm = operator_norm(&aty)?;
    if aty_norm <= lambda {
        return Ok(RecoveryResult::trivial(
            DenseMatrix::zeros(n1, n2),
            0.0,
            true,
            "zero is feasible",
        ));
    }
    let gram = gram_norm_for_steps(op);
    if gram == 0.0 {
        return Ok(infeasible_zero(n1, n2, "operator is zero"));
    }

    // A' = A / sqrt(L): ||A^*y - A^*A Z|| <= lambda  <=>  ||b' - G' Z|| <= lambda / L
    // with G' = A'^* A' (unit norm) and b' = A^*y / L; then Z = c Z'.
    let unit_op = op.scale(1.0 / gram.sqrt());
    let c = aty_norm / gram;
    let center = aty.scaled(1.0 / (gram * c));
    let radius = lambda / (gram * c);
    let coupling = SpectralCoupling {
        op: &unit_op,
        center,
        radius,
    };
    let out = linearized_admm(&coupling, (n1, n2), cfg)?;
    let z = polish_dantzig(op, y, lambda, out.z.scaled(c))?;

    let res = dantzig_residual(op, y, &z)?;
    let feasible = res <= lambda + cfg.abs_tol;
    let diagnostic = (!out.converged)
        .then(|| format!("max_iters reached (primal {:.3e}, dual {:.3e})", out.primal, out.dual));
    Ok(RecoveryResult {
        objective: nuclear_norm(&z)?,
        x_hat: z,
        iterations: out.iterations,
        primal_residual: out.primal,
        dual_residual: out.dual,
        feasible,
        converged: out.converged,
        diagnostic,
        history: scale_history(out.history, c),
    })
}

fn infeasible_zero(n1: usize, n2: usize, note: &str) -> RecoveryResult {
    let mut r = RecoveryResult::trivial(DenseMatrix::zeros(n1, n2), 0.0, false, note);
    r.converged = false;
    r
}

fn scale_history(h: Vec<(usize, f64, f64)>, c: f64) -> Vec<HistoryEntry> {
    h.into_iter()
        .map(|(iter, objective, residual)| HistoryEntry {
            iter,
            objective: objective * c,
            residual,
        })
        .collect()
}

/// Largest system solved directly when restoring feasibility.
const POLISH_MAX_DIM: usize = 1024;

/// Minimum-norm correction `Z + D` that moves the residual `y - A(Z)` back
/// onto the radius-`radius` ball when ADMM stopped just outside it. Leaves
/// `z` unchanged when the correction cannot reduce the violation.
fn polish_ball(op: &MeasurementOperator, y: &[f64], radius: f64, z: DenseMatrix) -> Result<DenseMatrix> {
    let az = op.apply(&z)?;
    let r: Vec<f64> = y.iter().zip(&az).map(|(a, b)| a - b).collect();
    let rn = norm2(&r);
    if rn <= radius {
        return Ok(z);
    }
    let (n1, n2) = op.shape();
    let m = op.m();
    if m.min(n1 * n2) > POLISH_MAX_DIM {
        return Ok(z);
    }
    // Target residual: r scaled onto the ball, slightly inside.
    let keep = radius * (1.0 - 1e-12) / rn;
    let d: Vec<f64> = r.iter().map(|v| v * (1.0 - keep)).collect();
    let Some(delta) = min_norm_preimage(op, &d)? else {
        return Ok(z);
    };
    let mut candidate = z.clone();
    candidate += &delta;
    if residual_norm(op, y, &candidate)? < rn {
        Ok(candidate)
    } else {
        Ok(z)
    }
}

/// Moves `z` along the least-squares direction `D = A^+(y - A(z))`. Since
/// `A^*(y - A(z + D)) = 0` and the Dantzig residual is affine in `z`, the step
/// `z + t D` scales the residual matrix by `1 - t`; `t` is the smallest value
/// restoring `||A^*(y - A(z))||_2 <= lambda`.
fn polish_dantzig(op: &MeasurementOperator, y: &[f64], lambda: f64, z: DenseMatrix) -> Result<DenseMatrix> {
    let res = dantzig_residual(op, y, &z)?;
    if res <= lambda {
        return Ok(z);
    }
    let (n1, n2) = op.shape();
    if op.m().min(n1 * n2) > POLISH_MAX_DIM {
        return Ok(z);
    }
    let az = op.apply(&z)?;
    let r: Vec<f64> = y.iter().zip(&az).map(|(a, b)| a - b).collect();
    let Some(d) = min_norm_preimage(op, &r)? else {
        return Ok(z);
    };
    let t = 1.0 - lambda * (1.0 - 1e-12) / res;
    let mut candidate = z.clone();
    candidate.axpy(t, &d);
    if dantzig_residual(op, y, &candidate)? < res {
        Ok(candidate)
    } else {
        Ok(z)
    }
}

/// `argmin ||D||_F` over least-squares solutions of `A(D) = d`.
fn min_norm_preimage(op: &MeasurementOperator, d: &[f64]) -> Result<Option<DenseMatrix>> {
    let v = op.vectorized().to_nalgebra();
    let rhs = nalgebra::DVector::from_column_slice(d);
    let (n1, n2) = op.shape();
    let sol = if op.m() <= n1 * n2 {
        // D = A^*(A A^*)^{-1} d
        let k = &v * v.transpose();
        match k.cholesky() {
            Some(ch) => v.transpose() * ch.solve(&rhs),
            None => return pinv_solve(&v, &rhs, n1, n2),
        }
    } else {
        let g = v.transpose() * &v;
        match g.cholesky() {
            Some(ch) => ch.solve(&(v.transpose() * rhs)),
            None => return pinv_solve(&v, &rhs, n1, n2),
        }
    };
    Ok(Some(DenseMatrix::from_vec(n1, n2, sol.iter().copied().collect())?))
}

fn pinv_solve(
    v: &nalgebra::DMatrix<f64>,
    rhs: &nalgebra::DVector<f64>,
    n1: usize,
    n2: usize,
) -> Result<Option<DenseMatrix>> {
    let f = svd(&DenseMatrix::from_nalgebra(v))?;
    let tol = f.sigma[0] * 1e-12;
    let mut out = vec![0.0; n1 * n2];
    for k in 0..f.sigma.len() {
        if f.sigma[k] <= tol {
            break;
        }
        let uk = f.u.column(k);
        let coef = dot(&uk, rhs.as_slice()) / f.sigma[k];
        for (o, j) in out.iter_mut().zip(0..n1 * n2) {
            *o += coef * f.v[(j, k)];
        }
    }
    Ok(Some(DenseMatrix::from_vec(n1, n2, out)?))
}
