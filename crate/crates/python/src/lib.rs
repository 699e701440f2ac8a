//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lstar::cmsv::Direction;
use lstar::ensembles::{EnsembleKind, EnsembleSpec};
use lstar::experiment::{ExperimentConfig, OutputFormat};
use lstar::operator::MeasurementScenario;
use lstar::solvers::{RecoveryResult, SolverConfig};
use lstar::{DenseMatrix, MeasurementOperator};

fn to_py(e: lstar::Error) -> PyErr {
    match e {
        lstar::Error::Io(m) => PyIOError::new_err(m),
        lstar::Error::Numerical(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(to_py)
}

fn direction(name: &str) -> PyResult<Direction> {
    match name {
        "min" => Ok(Direction::Min),
        "max" => Ok(Direction::Max),
        _ => Err(PyValueError::new_err(format!("direction must be 'min' or 'max', got {name:?}"))),
    }
}

fn solver_config(max_iters: Option<usize>, abs_tol: Option<f64>, rel_tol: Option<f64>) -> SolverConfig {
    let d = SolverConfig::default();
    SolverConfig {
        max_iters: max_iters.unwrap_or(d.max_iters),
        abs_tol: abs_tol.unwrap_or(d.abs_tol),
        rel_tol: rel_tol.unwrap_or(d.rel_tol),
        ..d
    }
}

/// Linear measurement operator `X -> (<A_k, X>)_k`.
#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: MeasurementOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    fn new(matrices: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let mats = matrices.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        Ok(PyOperator {
            inner: MeasurementOperator::new(mats).map_err(to_py)?,
        })
    }

    /// Random operator with i.i.d. Gaussian or Rademacher entries.
    #[staticmethod]
    #[pyo3(signature = (kind, n1, n2, m, seed = 0, normalize = false))]
    fn random(kind: &str, n1: usize, n2: usize, m: usize, seed: u64, normalize: bool) -> PyResult<Self> {
        let kind = match kind {
            "gaussian" => EnsembleKind::Gaussian,
            "rademacher" => EnsembleKind::Rademacher,
            _ => return Err(PyValueError::new_err(format!("unknown ensemble {kind:?}"))),
        };
        let spec = EnsembleSpec {
            kind,
            n1,
            n2,
            m,
            seed,
            normalize,
        };
        Ok(PyOperator {
            inner: lstar::ensembles::draw_operator(&spec).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn identity(n1: usize, n2: usize) -> Self {
        PyOperator {
            inner: MeasurementOperator::orthonormal_basis(n1, n2),
        }
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn apply(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.apply(&matrix(x)?).map_err(to_py)
    }

    fn adjoint(&self, z: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.adjoint(&z).map_err(to_py)?.to_rows())
    }

    fn scale(&self, c: f64) -> Self {
        PyOperator {
            inner: self.inner.scale(c),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyOperator {
            inner: MeasurementOperator::from_json(s).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        let (n1, n2) = self.inner.shape();
        format!("Operator(n1={n1}, n2={n2}, m={})", self.inner.m())
    }
}

#[pyfunction]
fn nuclear_norm(x: Vec<Vec<f64>>) -> PyResult<f64> {
    lstar::linalg::nuclear_norm(&matrix(x)?).map_err(to_py)
}

#[pyfunction]
fn operator_norm(x: Vec<Vec<f64>>) -> PyResult<f64> {
    lstar::linalg::operator_norm(&matrix(x)?).map_err(to_py)
}

#[pyfunction]
fn singular_values(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    lstar::linalg::singular_values(&matrix(x)?).map_err(to_py)
}

/// `||X||_*^2 / ||X||_F^2`.
#[pyfunction]
fn lstar_rank(x: Vec<Vec<f64>>) -> PyResult<f64> {
    lstar::linalg::lstar_rank(&matrix(x)?).map_err(to_py)
}

#[pyfunction]
fn prox_nuclear(x: Vec<Vec<f64>>, threshold: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(lstar::linalg::prox_nuclear(&matrix(x)?, threshold).map_err(to_py)?.to_rows())
}

fn result_dict<'py>(py: Python<'py>, r: RecoveryResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x_hat", r.x_hat.to_rows())?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("feasible", r.feasible)?;
    d.set_item("objective", r.objective)?;
    d.set_item("primal_residual", r.primal_residual)?;
    d.set_item("dual_residual", r.dual_residual)?;
    Ok(d)
}

/// Solves `mbp`, `mds` or `mlasso` for observations `y`; `parameter` is
/// epsilon, lambda or mu respectively.
#[pyfunction]
#[pyo3(signature = (op, y, algorithm, parameter, max_iters = None, abs_tol = None, rel_tol = None))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    op: &PyOperator,
    y: Vec<f64>,
    algorithm: &str,
    parameter: f64,
    max_iters: Option<usize>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let scenario = MeasurementScenario::with_observations(op.inner.clone(), y).map_err(to_py)?;
    let cfg = solver_config(max_iters, abs_tol, rel_tol);
    let r = py
        .detach(|| match algorithm {
            "mbp" => Some(lstar::solvers::solve_mbp(&scenario, parameter, &cfg)),
            "mds" => Some(lstar::solvers::solve_mds(&scenario, parameter, &cfg)),
            "mlasso" => Some(lstar::solvers::solve_mlasso(&scenario, parameter, &cfg)),
            _ => None,
        })
        .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm {algorithm:?}")))?
        .map_err(to_py)?;
    result_dict(py, r)
}

/// Multi-start estimate of the l*-constrained singular value; returns
/// `(value, witness)`.
#[pyfunction]
#[pyo3(signature = (op, tau, direction = "min", starts = 32, seed = 0))]
fn estimate_cmsv(
    py: Python<'_>,
    op: &PyOperator,
    tau: f64,
    direction: &str,
    starts: usize,
    seed: u64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let dir = self::direction(direction)?;
    let cfg = lstar::experiment::default_estimator();
    let e = py
        .detach(|| lstar::cmsv::estimate_cmsv(&op.inner, tau, dir, starts, seed, &cfg))
        .map_err(to_py)?;
    Ok((e.value, e.witness.to_rows()))
}

/// Sampling oracle for shapes with `n1 * n2 <= 9`.
#[pyfunction]
#[pyo3(signature = (op, tau, direction = "min", samples = 100_000, seed = 0))]
fn brute_force_cmsv(
    py: Python<'_>,
    op: &PyOperator,
    tau: f64,
    direction: &str,
    samples: usize,
    seed: u64,
) -> PyResult<f64> {
    let dir = self::direction(direction)?;
    py.detach(|| lstar::cmsv::brute_force_cmsv(&op.inner, tau, dir, samples, seed))
        .map(|e| e.value)
        .map_err(to_py)
}

/// Rank-constrained singular value.
#[pyfunction]
#[pyo3(signature = (op, r, direction = "min", starts = 16, seed = 0))]
fn estimate_rcsv(py: Python<'_>, op: &PyOperator, r: usize, direction: &str, starts: usize, seed: u64) -> PyResult<f64> {
    let dir = self::direction(direction)?;
    let cfg = lstar::experiment::default_estimator();
    py.detach(|| lstar::cmsv::estimate_rcsv(&op.inner, r, dir, starts, seed, &cfg))
        .map(|e| e.value)
        .map_err(to_py)
}

#[pyfunction]
fn bound_mbp(epsilon: f64, rho: f64) -> PyResult<f64> {
    lstar::bounds::bound_mbp(epsilon, rho).map_err(to_py)
}

#[pyfunction]
fn bound_mds(r: usize, lam: f64, rho: f64) -> PyResult<f64> {
    lstar::bounds::bound_mds(r, lam, rho).map_err(to_py)
}

#[pyfunction]
fn bound_mlasso(r: usize, mu: f64, kappa: f64, rho: f64) -> PyResult<f64> {
    lstar::bounds::bound_mlasso(r, mu, kappa, rho).map_err(to_py)
}

#[pyfunction]
fn mric_upper_bound(rho_min: f64, rho_max: f64) -> PyResult<f64> {
    lstar::cmsv::mric_upper_bound(rho_min, rho_max).map_err(to_py)
}

/// Runs an experiment from its JSON config; returns `{file name: contents}`.
#[pyfunction]
#[pyo3(signature = (config, format = "both"))]
fn run_experiment<'py>(py: Python<'py>, config: &str, format: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json(config).map_err(to_py)?;
    let format = match format {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        "both" => OutputFormat::Both,
        _ => return Err(PyValueError::new_err(format!("unknown format {format:?}"))),
    };
    let out = py.detach(|| lstar::experiment::run(&cfg, format)).map_err(to_py)?;
    let d = PyDict::new(py);
    for f in out.files {
        d.set_item(f.name, f.contents)?;
    }
    Ok(d)
}

#[pymodule]
fn lstar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lstar::VERSION)?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(nuclear_norm, m)?)?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(lstar_rank, m)?)?;
    m.add_function(wrap_pyfunction!(prox_nuclear, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_cmsv, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_cmsv, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rcsv, m)?)?;
    m.add_function(wrap_pyfunction!(bound_mbp, m)?)?;
    m.add_function(wrap_pyfunction!(bound_mds, m)?)?;
    m.add_function(wrap_pyfunction!(bound_mlasso, m)?)?;
    m.add_function(wrap_pyfunction!(mric_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_names() {
        assert_eq!(direction("min").unwrap(), Direction::Min);
        assert_eq!(direction("max").unwrap(), Direction::Max);
    }

    #[test]
    fn solver_overrides() {
        let c = solver_config(Some(10), None, Some(1e-3));
        assert_eq!(c.max_iters, 10);
        assert_eq!(c.abs_tol, SolverConfig::default().abs_tol);
        assert_eq!(c.rel_tol, 1e-3);
    }
}
