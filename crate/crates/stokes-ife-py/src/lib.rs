//! Python bindings: drive solves, convergence studies, and the verification
//! suites of the immersed CR-P0 Stokes solver from Python.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use stokes_ife::analysis::{compute_errors, solve_problem, ExactStokes, StudyRow};
use stokes_ife::assembly::SchemeParams;
use stokes_ife::cli::{emit, ConvergenceReport, Format};
use stokes_ife::verify;

fn to_py_err(e: stokes_ife::Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn params(mu_plus: f64, mu_minus: f64, delta: f64, eta: f64) -> PyResult<SchemeParams> {
    SchemeParams::new(mu_plus, mu_minus, delta, eta).map_err(to_py_err)
}

fn row_to_dict<'py>(py: Python<'py>, row: &StudyRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", row.n)?;
    d.set_item("eu_l2", row.eu_l2)?;
    d.set_item("eu_l2_rate", row.eu_l2_rate)?;
    d.set_item("eu_h1", row.eu_h1)?;
    d.set_item("eu_h1_rate", row.eu_h1_rate)?;
    d.set_item("ep_l2", row.ep_l2)?;
    d.set_item("ep_l2_rate", row.ep_l2_rate)?;
    Ok(d)
}

/// Solve the reference interface problem once and return errors, solver
/// diagnostics, and the raw coefficient vectors.
#[pyfunction]
#[pyo3(signature = (n, mu_plus=5.0, mu_minus=1.0, delta=-1.0, eta=0.0, r0=0.5))]
fn solve(
    py: Python<'_>,
    n: usize,
    mu_plus: f64,
    mu_minus: f64,
    delta: f64,
    eta: f64,
    r0: f64,
) -> PyResult<Bound<'_, PyDict>> {
    if n < 2 || n % 2 != 0 {
        return Err(PyValueError::new_err(format!("n={n} must be even and at least 2")));
    }
    let p = params(mu_plus, mu_minus, delta, eta)?;
    let (disc, sol) = solve_problem(n, p, r0).map_err(to_py_err)?;
    let exact = ExactStokes::new(r0, mu_plus, mu_minus).map_err(to_py_err)?;
    let errs = compute_errors(&disc, &sol.velocity, &sol.pressure, &exact).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", n)?;
    d.set_item("eu_l2", errs.eu_l2)?;
    d.set_item("eu_h1", errs.eu_h1)?;
    d.set_item("ep_l2", errs.ep_l2)?;
    d.set_item("residual", sol.residual)?;
    d.set_item("multiplier", sol.multiplier)?;
    d.set_item("n_interface_elements", disc.classification.interface_elements.len())?;
    d.set_item("velocity", sol.velocity)?;
    d.set_item("pressure", sol.pressure)?;
    Ok(d)
}

/// Run a convergence study over a list of resolutions; returns one dict per
/// resolution with errors and successive rates.
#[pyfunction]
#[pyo3(signature = (ns, mu_plus=5.0, mu_minus=1.0, delta=-1.0, eta=0.0, r0=0.5))]
fn study(
    py: Python<'_>,
    ns: Vec<usize>,
    mu_plus: f64,
    mu_minus: f64,
    delta: f64,
    eta: f64,
    r0: f64,
) -> PyResult<Bound<'_, PyList>> {
    for &n in &ns {
        if n < 2 || n % 2 != 0 {
            return Err(PyValueError::new_err(format!("n={n} must be even and at least 2")));
        }
    }
    let p = params(mu_plus, mu_minus, delta, eta)?;
    let rows = stokes_ife::analysis::run_study(&ns, p, r0).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for row in &rows {
        list.append(row_to_dict(py, row)?)?;
    }
    Ok(list)
}

/// Render study rows in one of the text formats: "table", "csv", "json", or
/// "plot" (a self-contained gnuplot script).
#[pyfunction]
#[pyo3(signature = (rows, format="table", mu_plus=5.0, mu_minus=1.0, delta=-1.0, eta=0.0, r0=0.5))]
fn render(
    rows: Vec<Bound<'_, PyDict>>,
    format: &str,
    mu_plus: f64,
    mu_minus: f64,
    delta: f64,
    eta: f64,
    r0: f64,
) -> PyResult<String> {
    let fmt = match format {
        "table" => Format::Table,
        "csv" => Format::Csv,
        "json" => Format::Json,
        "plot" => Format::Plot,
        other => return Err(PyValueError::new_err(format!("unknown format '{other}'"))),
    };
    let mut parsed = Vec::with_capacity(rows.len());
    for d in &rows {
        let get_f64 = |key: &str| -> PyResult<f64> {
            d.get_item(key)?
                .ok_or_else(|| PyValueError::new_err(format!("row missing key '{key}'")))?
                .extract::<f64>()
        };
        let get_rate = |key: &str| -> PyResult<Option<f64>> {
            match d.get_item(key)? {
                Some(v) if !v.is_none() => Ok(Some(v.extract::<f64>()?)),
                _ => Ok(None),
            }
        };
        parsed.push(StudyRow {
            n: d.get_item("n")?
                .ok_or_else(|| PyValueError::new_err("row missing key 'n'"))?
                .extract::<usize>()?,
            eu_l2: get_f64("eu_l2")?,
            eu_l2_rate: get_rate("eu_l2_rate")?,
            eu_h1: get_f64("eu_h1")?,
            eu_h1_rate: get_rate("eu_h1_rate")?,
            ep_l2: get_f64("ep_l2")?,
            ep_l2_rate: get_rate("ep_l2_rate")?,
        });
    }
    let report = ConvergenceReport {
        mode: "study".into(),
        mu_plus,
        mu_minus,
        delta,
        eta,
        r0,
        rows: parsed,
        solve: None,
    };
    emit(&report, fmt).map_err(to_py_err)
}

/// Run the randomized property-check suites (geometry, basis, oracle,
/// scheme structure) and return their results.
#[pyfunction]
#[pyo3(signature = (seed=42))]
fn run_verification(py: Python<'_>, seed: u64) -> PyResult<Bound<'_, PyDict>> {
    let reports = verify::run_all(seed).map_err(to_py_err)?;
    let out = PyDict::new(py);
    let suites = PyList::empty(py);
    let mut all_passed = true;
    let mut failures = 0usize;
    for r in &reports {
        all_passed &= r.passed();
        failures += r.total_failures();
        let d = PyDict::new(py);
        d.set_item("name", r.name)?;
        d.set_item("cases", r.cases)?;
        d.set_item("passed", r.passed())?;
        d.set_item("failures", r.total_failures())?;
        d.set_item("text", r.render())?;
        suites.append(d)?;
    }
    out.set_item("passed", all_passed)?;
    out.set_item("failures", failures)?;
    out.set_item("suites", suites)?;
    Ok(out)
}

#[pymodule]
fn stokes_ife_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(run_verification, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
