use foliation_core::chart_metrics::{zoo_build, ChartPoint, SpacetimeSpec};
use foliation_core::cli_reports::{execute_args, validate_envelope, SCHEMA};
use foliation_core::foliation_geometry::shape_operator;
use foliation_core::riccati_flow::{riccati_closed_form, RiccatiParams};
use foliation_core::GeomError;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: GeomError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn spec_from_json(spec: &str) -> PyResult<SpacetimeSpec> {
    serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs one `foliate` command in-process; returns (exit code, report text).
#[pyfunction]
fn run(args: Vec<String>) -> (i32, String) {
    let exec = execute_args(std::iter::once("foliate".to_string()).chain(args));
    let text = if exec.text.is_empty() { exec.message.unwrap_or_default() } else { exec.text };
    (exec.code, text)
}

#[pyfunction]
fn zoo() -> Vec<String> {
    SpacetimeSpec::catalogue().iter().map(|s| s.name().to_string()).collect()
}

#[pyfunction]
fn schema() -> &'static str {
    SCHEMA
}

/// Checks a JSON report against the required keys of the shipped schema.
#[pyfunction]
fn validate_report(report: &str) -> PyResult<()> {
    let v: serde_json::Value = serde_json::from_str(report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    validate_envelope(&v).map_err(PyValueError::new_err)
}

#[pyfunction]
fn riccati(kappa: f64, h0: f64, s: f64) -> PyResult<f64> {
    Ok(riccati_closed_form(RiccatiParams::new(kappa, h0).map_err(value_error)?).evaluate(s))
}

#[pyfunction]
fn blow_up(kappa: f64, h0: f64) -> PyResult<Option<f64>> {
    Ok(riccati_closed_form(RiccatiParams::new(kappa, h0).map_err(value_error)?).blow_up)
}

/// Mean curvature of the canonical leaf through `point`; `spec` is a JSON spacetime spec.
#[pyfunction]
fn mean_curvature(spec: &str, point: Vec<f64>) -> PyResult<f64> {
    let (_, fol) = zoo_build(&spec_from_json(spec)?).map_err(value_error)?;
    let p = ChartPoint::new(point).map_err(value_error)?;
    Ok(shape_operator(&fol, &p).map_err(value_error)?.mean_curvature)
}

#[pymodule]
fn foliation(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(zoo, m)?)?;
    m.add_function(wrap_pyfunction!(schema, m)?)?;
    m.add_function(wrap_pyfunction!(validate_report, m)?)?;
    m.add_function(wrap_pyfunction!(riccati, m)?)?;
    m.add_function(wrap_pyfunction!(blow_up, m)?)?;
    m.add_function(wrap_pyfunction!(mean_curvature, m)?)?;
    Ok(())
}
