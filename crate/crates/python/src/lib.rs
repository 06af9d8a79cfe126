//! Python bindings for the `idfom` solver.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use idfom::bench::{self, RandomQpConfig};
use idfom::linalg::{Bounds, DenseMatrix};
use idfom::mpc::{self, AngleUnit, DisturbanceConfig};
use idfom::outer::{self, DeltaPolicy, Recovery, SolveConfig, Variant};
use idfom::{certify, problem};

fn err(e: idfom::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = idfom::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn extended(v: Option<Vec<Option<f64>>>, len: usize, missing: f64) -> Vec<f64> {
    match v {
        Some(v) => v.into_iter().map(|x| x.unwrap_or(missing)).collect(),
        None => vec![missing; len],
    }
}

/// Strongly convex QP `min 1/2 u'Qu + q'u` over a box with two-sided rows
/// `clb <= Gbar u + gbar <= cub`. `None` entries in bounds mean infinite.
#[pyclass(name = "QpProblem", module = "idfom_py", skip_from_py_object)]
#[derive(Clone)]
struct PyQpProblem {
    inner: problem::QpProblem,
}

#[pymethods]
impl PyQpProblem {
    #[new]
    #[pyo3(signature = (q_mat, q, g_mat, gbar, lb=None, ub=None, clb=None, cub=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        q_mat: Vec<Vec<f64>>,
        q: Vec<f64>,
        g_mat: Vec<Vec<f64>>,
        gbar: Vec<f64>,
        lb: Option<Vec<Option<f64>>>,
        ub: Option<Vec<Option<f64>>>,
        clb: Option<Vec<Option<f64>>>,
        cub: Option<Vec<Option<f64>>>,
    ) -> PyResult<Self> {
        let n = q.len();
        let m = gbar.len();
        let hessian = DenseMatrix::from_rows(&q_mat, n).map_err(err)?;
        let gm = DenseMatrix::from_rows(&g_mat, n).map_err(err)?;
        let bounds = Bounds::new(extended(lb, n, f64::NEG_INFINITY), extended(ub, n, f64::INFINITY)).map_err(err)?;
        let inner = problem::QpProblem::new(
            hessian,
            q,
            bounds,
            gm,
            gbar,
            extended(clb, m, f64::NEG_INFINITY),
            extended(cub, m, f64::INFINITY),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: problem::QpProblem::from_json_str(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }

    fn objective(&self, u: Vec<f64>) -> PyResult<f64> {
        let np = problem::normalize(&self.inner).map_err(err)?;
        if u.len() != np.dim() {
            return Err(PyValueError::new_err(format!("expected {} entries, got {}", np.dim(), u.len())));
        }
        Ok(np.objective(&u))
    }

    fn max_violation(&self, u: Vec<f64>) -> f64 {
        self.inner.max_violation(&u)
    }

    fn __repr__(&self) -> String {
        format!("QpProblem(n={}, rows={})", self.inner.dim(), self.inner.num_constraints())
    }
}

/// Runs the inexact dual method and returns a dict with `status`, `f`,
/// `infeas`, `outer_iterations`, `total_inner_iterations`, `u` and `x`.
#[pyfunction]
#[pyo3(signature = (qp, algorithm="idfgm", recovery="last", eps=1e-2, delta=None, max_outer=100_000, rd=None, f_ref=None))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    qp: &PyQpProblem,
    algorithm: &str,
    recovery: &str,
    eps: f64,
    delta: Option<f64>,
    max_outer: usize,
    rd: Option<f64>,
    f_ref: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let np = problem::normalize(&qp.inner).map_err(err)?;
    let c = problem::constants(&np).map_err(err)?;
    let mut cfg = SolveConfig::new(parse::<Variant>(algorithm)?, parse::<Recovery>(recovery)?, eps);
    if let Some(d) = delta {
        cfg.delta = DeltaPolicy::Fixed(d);
    }
    cfg.max_outer = max_outer;
    cfg.rd = rd;
    cfg.f_ref = f_ref;
    let r = outer::solve(&np, &c, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("status", r.status.name())?;
    d.set_item("f", r.f)?;
    d.set_item("infeas", r.infeas)?;
    d.set_item("outer_iterations", r.outer_iterations)?;
    d.set_item("total_inner_iterations", r.total_inner_iterations)?;
    d.set_item("u", r.u_out)?;
    d.set_item("x", r.x_out)?;
    Ok(d)
}

/// Inner accuracy and iteration bounds for a target accuracy, as a dict.
#[pyfunction]
#[pyo3(signature = (qp, algorithm="idfgm", recovery="last", eps=1e-2, rd=None))]
fn certificate<'py>(
    py: Python<'py>,
    qp: &PyQpProblem,
    algorithm: &str,
    recovery: &str,
    eps: f64,
    rd: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let np = problem::normalize(&qp.inner).map_err(err)?;
    let c = problem::constants(&np).map_err(err)?;
    let cert = certify::certificate(&c, parse(algorithm)?, parse(recovery)?, eps, rd).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("variant", cert.variant.name())?;
    d.set_item("recovery", cert.recovery.name())?;
    d.set_item("eps", cert.eps)?;
    d.set_item("delta", cert.delta)?;
    d.set_item("alpha", cert.alpha)?;
    d.set_item("outer_bound", cert.outer_bound)?;
    d.set_item("total_projection_bound", cert.total_projection_bound)?;
    d.set_item("r_d_used", cert.r_d_used)?;
    d.set_item("r_p_used", cert.r_p_used)?;
    Ok(d)
}

/// Seeded random QP with a strictly feasible box centre.
#[pyfunction]
#[pyo3(signature = (n, p, seed, cond=10.0, box_halfwidth=10.0))]
fn random_qp(n: usize, p: usize, seed: u64, cond: f64, box_halfwidth: f64) -> PyResult<PyQpProblem> {
    let mut cfg = RandomQpConfig::new(n, p, seed);
    cfg.cond = cond;
    cfg.box_halfwidth = box_halfwidth;
    Ok(PyQpProblem {
        inner: bench::random_qp(&cfg).map_err(err)?,
    })
}

/// Exact solution by active-set enumeration, falling back to the
/// high-accuracy reference solver for larger problems.
#[pyfunction]
fn exact_solve<'py>(py: Python<'py>, qp: &PyQpProblem) -> PyResult<Bound<'py, PyDict>> {
    let np = problem::normalize(&qp.inner).map_err(err)?;
    let c = problem::constants(&np).map_err(err)?;
    let s = bench::exact_solve(&np, &c).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("u_star", s.u_star)?;
    d.set_item("f_star", s.f_star)?;
    d.set_item("x_star", s.x_star)?;
    d.set_item("kkt_residual", s.kkt_residual)?;
    Ok(d)
}

/// Closed-loop MPC of the balancing robot. Returns the state and input
/// trajectories plus per-step outer iteration counts.
#[pyfunction]
#[pyo3(signature = (steps=200, eps=1e-2, beta=0.1, horizon=10, algorithm="idgm", recovery="last", disturbances=true))]
#[allow(clippy::too_many_arguments)]
fn simulate_robot<'py>(
    py: Python<'py>,
    steps: usize,
    eps: f64,
    beta: f64,
    horizon: usize,
    algorithm: &str,
    recovery: &str,
    disturbances: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let model = mpc::balancing_robot_model();
    let spec = mpc::balancing_robot_spec(horizon, beta, AngleUnit::Degrees);
    let cfg = SolveConfig::new(parse(algorithm)?, parse(recovery)?, eps);
    let dist = if disturbances {
        DisturbanceConfig::robot_default()
    } else {
        DisturbanceConfig::none()
    };
    let sim = mpc::simulate_closed_loop(&model, &spec, &[0.0, 0.0, 0.5, -0.35], &cfg, steps, &dist).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", sim.steps.iter().map(|s| s.x.clone()).collect::<Vec<_>>())?;
    d.set_item("u", sim.steps.iter().map(|s| s.u[0]).collect::<Vec<_>>())?;
    d.set_item("outer_iters", sim.steps.iter().map(|s| s.outer_iters).collect::<Vec<_>>())?;
    d.set_item("inner_total", sim.steps.iter().map(|s| s.inner_total).collect::<Vec<_>>())?;
    d.set_item("final_state", sim.final_state)?;
    Ok(d)
}

#[pymodule]
fn idfom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQpProblem>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(random_qp, m)?)?;
    m.add_function(wrap_pyfunction!(exact_solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_robot, m)?)?;
    Ok(())
}
