//! Python bindings: model quantities, analytic spectra, eigenanalysis,
//! transverse modes and the command runner.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rotsqueeze::analysis::{
    analytic_v as core_analytic_v, analytic_v_aniso as core_analytic_v_aniso, eigensystem_l,
    AnisoQuadrature,
};
use rotsqueeze::modes::{mode_value as core_mode_value, ModeKind};
use rotsqueeze::{cli, experiments, model, Error, ModelParams, RunConfig};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyOSError::new_err(e.to_string()),
    }
}

fn to_py<'py, S: serde::Serialize>(py: Python<'py>, value: &S) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn params(sigma: f64, g: f64, kappa: f64, gamma_p_over_gamma_s: f64) -> PyResult<ModelParams> {
    let p = ModelParams {
        sigma,
        g,
        kappa,
        gamma_p_over_gamma_s,
        ..ModelParams::default()
    };
    p.validate().map_err(py_err)?;
    Ok(p)
}

/// Classical operating point and derived rates as a dict. `theta` in radians.
#[pyfunction]
#[pyo3(signature = (sigma, g = 0.01, kappa = 0.0, gamma_p_over_gamma_s = 100.0, theta = 0.0))]
fn steady_state<'py>(
    py: Python<'py>,
    sigma: f64,
    g: f64,
    kappa: f64,
    gamma_p_over_gamma_s: f64,
    theta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params(sigma, g, kappa, gamma_p_over_gamma_s)?;
    to_py(py, &experiments::steady_report(&p, theta).map_err(py_err)?)
}

/// Orientation diffusion coefficient in units of `gamma_s`.
#[pyfunction]
#[pyo3(signature = (sigma, g = 0.01, gamma_p_over_gamma_s = 100.0))]
fn diffusion_coefficient(sigma: f64, g: f64, gamma_p_over_gamma_s: f64) -> PyResult<f64> {
    let p = params(sigma, g, 0.0, gamma_p_over_gamma_s)?;
    model::diffusion_coefficient(&p).map_err(py_err)
}

/// Isotropic noise spectrum at frequency `omega` and LO phase `psi_l` (radians).
#[pyfunction]
fn analytic_v(omega: f64, psi_l: f64) -> f64 {
    core_analytic_v(omega, psi_l)
}

/// Anisotropic spectrum; `psi_l` must be 0 or pi/2.
#[pyfunction]
fn analytic_v_aniso(omega: f64, psi_l: f64, kappa: f64) -> PyResult<f64> {
    let q = AnisoQuadrature::from_psi(psi_l).map_err(py_err)?;
    core_analytic_v_aniso(omega, q, kappa).map_err(py_err)
}

/// Eigenvalues (descending), eigenvectors and the Goldstone/squeezed indices
/// of the linearized drift matrix.
#[pyfunction]
#[pyo3(signature = (sigma, g = 0.01))]
fn eigensystem<'py>(py: Python<'py>, sigma: f64, g: f64) -> PyResult<Bound<'py, PyAny>> {
    let p = params(sigma, g, 0.0, 100.0)?;
    to_py(py, &eigensystem_l(&p).map_err(py_err)?)
}

/// Normalized transverse mode at `(x, y)`; `kind` is one of
/// `gauss`, `lg+1`, `lg-1`, `tem10`, `tem01`.
#[pyfunction]
#[pyo3(signature = (kind, x, y, theta = 0.0))]
fn mode_value(kind: &str, x: f64, y: f64, theta: f64) -> PyResult<Complex64> {
    let kind = match kind {
        "gauss" => ModeKind::Gauss,
        "lg+1" => ModeKind::LaguerrePlus,
        "lg-1" => ModeKind::LaguerreMinus,
        "tem10" => ModeKind::Tem10 { theta },
        "tem01" => ModeKind::Tem01 { theta },
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    Ok(core_mode_value(kind, x, y))
}

/// Runs a command as the CLI does, writing its files under `out`, and returns
/// the JSON summary as a dict. Keyword arguments are configuration keys.
#[pyfunction]
#[pyo3(signature = (command, out, **options))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    out: PathBuf,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RunConfig::default();
    if let Some(options) = options {
        for (k, v) in options.iter() {
            let key: String = k.extract()?;
            let value = match v.extract::<bool>() {
                Ok(b) => b.to_string(),
                Err(_) => v.str()?.to_string(),
            };
            cfg.set(&key, &value).map_err(py_err)?;
        }
    }
    cfg.out = out;
    let summary = py.detach(|| cli::execute(command, &cfg)).map_err(py_err)?;
    to_py(py, &summary)
}

#[pymodule]
#[pyo3(name = "rotsqueeze")]
fn rotsqueeze_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_v, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_v_aniso, m)?)?;
    m.add_function(wrap_pyfunction!(eigensystem, m)?)?;
    m.add_function(wrap_pyfunction!(mode_value, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
