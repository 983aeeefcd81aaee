//! Python module `elsa`. Matrices cross the boundary as lists of rows and
//! vectors as flat lists; reports come back as dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use elsa_core::attention::{self, ElsaParams, LsaParams};
use elsa_core::gauss::{self, DivisionMode, LinearSystem};
use elsa_core::invsqr::{KnotSpec, PiecewiseInvSqr};
use elsa_core::mask_move::{self, MskMovSpec};
use elsa_core::pipeline::{self, Form};
use elsa_core::ridge;
use elsa_core::verify::{verify_lemmas, VerifyConfig};
use elsa_core::{BlockSpec, Matrix};

type Rows = Vec<Vec<f64>>;

fn err(e: elsa_core::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn matrix(rows: &Rows) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(err)
}

fn column(v: &[f64]) -> PyResult<Matrix> {
    Matrix::column(v).map_err(err)
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Moves `a[i:j, k:l]` (1-based, inclusive) by `(da, db)` and zeroes the rest.
#[pyfunction]
fn mskmov(a: Rows, block: (usize, usize, usize, usize), shift: (isize, isize)) -> PyResult<Rows> {
    let a = matrix(&a)?;
    let (i, j, k, l) = block;
    let spec = MskMovSpec::new(BlockSpec::new(i, j, k, l), a.shape(), shift.0, shift.1);
    Ok(mask_move::mskmov(&a, &spec).map_err(err)?.to_rows())
}

#[pyfunction]
fn lsa_forward(h: Rows, w1: Rows, w2: Rows, w3: Rows) -> PyResult<Rows> {
    let p = LsaParams::new(matrix(&w1)?, matrix(&w2)?, matrix(&w3)?);
    Ok(attention::lsa_forward(&matrix(&h)?, &p).map_err(err)?.to_rows())
}

#[pyfunction]
fn elsa_forward(h: Rows, w1: Rows, w2: Rows, w3: Rows, b1: Rows, b2: Rows, b3: Rows) -> PyResult<Rows> {
    let p = ElsaParams {
        w1: matrix(&w1)?,
        w2: matrix(&w2)?,
        w3: matrix(&w3)?,
        b1: matrix(&b1)?,
        b2: matrix(&b2)?,
        b3: matrix(&b3)?,
    };
    Ok(attention::elsa_forward(&matrix(&h)?, &p).map_err(err)?.to_rows())
}

fn params_dict<'py>(py: Python<'py>, p: &ElsaParams) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &[
        ("w1", p.w1.to_rows()),
        ("w2", p.w2.to_rows()),
        ("w3", p.w3.to_rows()),
        ("b1", p.b1.to_rows()),
        ("b2", p.b2.to_rows()),
        ("b3", p.b3.to_rows()),
    ]
    .into_iter()
    .collect::<std::collections::BTreeMap<_, _>>())
}

/// ELSA weights and biases whose output is `c` for every input of its shape.
#[pyfunction]
fn const_params<'py>(py: Python<'py>, c: Rows) -> PyResult<Bound<'py, PyAny>> {
    let c = matrix(&c)?;
    params_dict(py, &attention::const_params(&c, c.shape()).map_err(err)?)
}

/// ELSA weights and biases that reproduce an `m x n` input.
#[pyfunction]
fn skip_params(py: Python<'_>, m: usize, n: usize) -> PyResult<Bound<'_, PyAny>> {
    params_dict(py, &attention::skip_params((m, n)))
}

/// `a @ b` computed by a single attention head (`variant` is lsa, v1 or v2).
#[pyfunction]
#[pyo3(signature = (a, b, variant = "v1"))]
fn attention_matmul(a: Rows, b: Rows, variant: &str) -> PyResult<Rows> {
    let (a, b) = (matrix(&a)?, matrix(&b)?);
    let (r, s, t) = (a.rows(), a.cols(), b.cols());
    let out = match variant {
        "lsa" => attention::lsa_matmul_params(r, s, t).and_then(|c| c.multiply(&a, &b)),
        "v1" => attention::matmul_params_v1(r, s, t).and_then(|c| c.multiply(&a, &b)),
        "v2" => attention::matmul_params_v2(r, s, t).and_then(|c| c.multiply(&a, &b)),
        other => return Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
    };
    Ok(out.map_err(err)?.to_rows())
}

#[pyclass(name = "RidgeProblem", module = "elsa", frozen)]
struct PyRidgeProblem {
    inner: ridge::RidgeProblem,
}

#[pymethods]
impl PyRidgeProblem {
    /// `eta=None` picks `1 / (sigma_max(X)^2 + lambda)`; `w0=None` starts at zero.
    #[new]
    #[pyo3(signature = (x, y, u, lam, steps, eta = None, w0 = None))]
    fn new(x: Rows, y: Vec<f64>, u: Vec<f64>, lam: f64, steps: usize, eta: Option<f64>, w0: Option<Vec<f64>>) -> PyResult<Self> {
        let x = matrix(&x)?;
        let d = x.cols();
        let w0 = match w0 {
            Some(v) => column(&v)?,
            None => Matrix::zeros(d, 1),
        };
        let mut p = ridge::RidgeProblem::new(x, column(&y)?, column(&u)?, lam, eta.unwrap_or(1.0), steps, w0).map_err(err)?;
        if eta.is_none() {
            p.eta = ridge::stable_eta(&p);
        }
        Ok(Self { inner: p })
    }

    /// Seeded random problem with entries in [-1, 1].
    #[staticmethod]
    #[pyo3(signature = (n, d, lam, steps, seed = 0))]
    fn random(n: usize, d: usize, lam: f64, steps: usize, seed: u64) -> Self {
        let mut rng = elsa_core::sample::stream_rng(seed, 0);
        Self {
            inner: elsa_core::sample::random_ridge_problem(&mut rng, n, d, lam, steps),
        }
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.x.shape()
    }

    fn closed_form(&self) -> PyResult<Vec<f64>> {
        Ok(ridge::ridge_closed_form(&self.inner).map_err(err)?.col_values(0))
    }

    /// Plain gradient-descent trace `w_0..w_T`.
    fn gd_trace(&self) -> Vec<Vec<f64>> {
        ridge::gd_run(&self.inner).1.iter().map(|w| w.col_values(0)).collect()
    }

    /// Runs the attention pipeline (`form` is lsa, elsa or lsa-as-elsa) and
    /// returns the run report with the `w` trace added.
    #[pyo3(signature = (form = "lsa"))]
    fn run<'py>(&self, py: Python<'py>, form: &str) -> PyResult<Bound<'py, PyAny>> {
        let form: Form = form.parse().map_err(err)?;
        let run = pipeline::run_pipeline(&self.inner, form).map_err(err)?;
        let report = to_dict(py, &run.report)?;
        let trace: Vec<Vec<f64>> = run.w_trace.iter().map(|w| w.col_values(0)).collect();
        report.set_item("w_trace", trace)?;
        Ok(report)
    }

    fn __repr__(&self) -> String {
        let (n, d) = self.inner.x.shape();
        format!(
            "RidgeProblem(n={n}, d={d}, lam={}, eta={}, steps={})",
            self.inner.lambda, self.inner.eta, self.inner.steps
        )
    }
}

/// ReLU-sum approximation of `1/x^2`.
#[pyclass(name = "InvSqr", module = "elsa", frozen)]
struct PyInvSqr {
    inner: PiecewiseInvSqr,
}

#[pymethods]
impl PyInvSqr {
    /// `knots` uses the CLI syntax, e.g. "geometric:x1=1e-2,xmax=1e2,n=128".
    #[new]
    #[pyo3(signature = (knots = None))]
    fn new(knots: Option<&str>) -> PyResult<Self> {
        let spec: KnotSpec = match knots {
            Some(s) => s.parse().map_err(err)?,
            None => KnotSpec::default(),
        };
        Ok(Self {
            inner: PiecewiseInvSqr::build(&spec).map_err(err)?,
        })
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    /// `x * sigma(x)`, the approximate `1/x`.
    fn reciprocal(&self, x: f64) -> f64 {
        self.inner.reciprocal(x)
    }

    #[getter]
    fn knots(&self) -> Vec<f64> {
        self.inner.knots().to_vec()
    }
}

/// Solves `f x = alpha` by component-built elimination. `mode` is "exact"
/// or "relu"; relu mode takes an optional knot spec. Returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (f, alpha, mode = "exact", knots = None))]
fn solve<'py>(py: Python<'py>, f: Rows, alpha: Vec<f64>, mode: &str, knots: Option<&str>) -> PyResult<(Vec<f64>, Bound<'py, PyAny>)> {
    let sys = LinearSystem::new(matrix(&f)?, column(&alpha)?).map_err(err)?;
    let mode = match mode {
        "exact" => DivisionMode::Exact,
        "relu" => {
            let spec: KnotSpec = knots.map_or(Ok(KnotSpec::default()), str::parse).map_err(err)?;
            DivisionMode::Relu(PiecewiseInvSqr::build(&spec).map_err(err)?)
        }
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let (x, report) = gauss::solve(&sys, &mode).map_err(err)?;
    Ok((x.col_values(0), to_dict(py, &report)?))
}

/// Runs the property suites; returns the report dict.
#[pyfunction]
#[pyo3(name = "verify_lemmas", signature = (trials = 100, max_dim = 6, seed = 0, tol = 1e-12))]
fn py_verify_lemmas(py: Python<'_>, trials: usize, max_dim: usize, seed: u64, tol: f64) -> PyResult<Bound<'_, PyAny>> {
    let cfg = VerifyConfig {
        seed,
        trials,
        max_dim,
        tol,
        perturb: false,
    };
    to_dict(py, &verify_lemmas(&cfg))
}

#[pymodule]
fn elsa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRidgeProblem>()?;
    m.add_class::<PyInvSqr>()?;
    m.add_function(wrap_pyfunction!(mskmov, m)?)?;
    m.add_function(wrap_pyfunction!(lsa_forward, m)?)?;
    m.add_function(wrap_pyfunction!(elsa_forward, m)?)?;
    m.add_function(wrap_pyfunction!(const_params, m)?)?;
    m.add_function(wrap_pyfunction!(skip_params, m)?)?;
    m.add_function(wrap_pyfunction!(attention_matmul, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_verify_lemmas, m)?)?;
    Ok(())
}
