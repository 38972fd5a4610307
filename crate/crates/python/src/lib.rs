//! Python bindings: parameters, phase states, integrals, integration,
//! critical families, the Lax pair, bifurcation slices and the acceptance
//! suite.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gyrostat::bifurcation::{sigma_h as core_sigma_h, Branch, SGrid, SingularKind};
use gyrostat::canonical::{canonicalize as core_canonicalize, DGParams};
use gyrostat::critical::{momentum_rank_info, seed_point as core_seed_point, stratum_residual, SeedOptions, Stratum, SVD_TOL};
use gyrostat::dynamics::integrate as core_integrate;
use gyrostat::error::Error;
use gyrostat::lax::{lax_eigenvalues as core_lax_eigenvalues, lax_residual as core_lax_residual, spectral_check_detail};
use gyrostat::phase::{casimir_residuals as core_casimir, complexify as core_complexify, integrals_real, realify, Params, PhaseState};
use gyrostat::scalar::Complex64;
use gyrostat::special::{equilibria as core_equilibria, pendulum_state as core_pendulum_state, PendulumFamily};
use gyrostat::verify::{rng_for, verify_all as core_verify_all, VerifyConfig};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "Params", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(Params);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (a, b, lambda_))]
    fn new(a: f64, b: f64, lambda_: f64) -> PyResult<Self> {
        Params::new(a, b, lambda_).map(PyParams).map_err(py_err)
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }
    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }
    #[getter(lambda_)]
    fn lambda(&self) -> f64 {
        self.0.lambda
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(PyParams).map_err(|e| PyValueError::new_err(e.to_string()))
    }
    fn __repr__(&self) -> String {
        format!("Params(a={}, b={}, lambda_={})", self.0.a, self.0.b, self.0.lambda)
    }
}

#[pyclass(name = "PhaseState", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPhaseState(PhaseState);

#[pymethods]
impl PyPhaseState {
    #[new]
    fn new(omega: [f64; 3], alpha: [f64; 3], beta: [f64; 3]) -> Self {
        PyPhaseState(PhaseState { omega, alpha, beta })
    }
    #[getter]
    fn omega(&self) -> [f64; 3] {
        self.0.omega
    }
    #[getter]
    fn alpha(&self) -> [f64; 3] {
        self.0.alpha
    }
    #[getter]
    fn beta(&self) -> [f64; 3] {
        self.0.beta
    }
    fn to_list(&self) -> [f64; 9] {
        self.0.to_array()
    }
    /// Random point of the orbit of `params`.
    #[staticmethod]
    #[pyo3(signature = (params, seed, omega_scale = 1.0))]
    fn random(params: &PyParams, seed: u64, omega_scale: f64) -> Self {
        PyPhaseState(PhaseState::random_on_orbit(&mut rng_for(seed, 0), &params.0, omega_scale))
    }
    fn __repr__(&self) -> String {
        format!("PhaseState(omega={:?}, alpha={:?}, beta={:?})", self.0.omega, self.0.alpha, self.0.beta)
    }
}

/// `(h, k, g)` at a real state.
#[pyfunction]
fn integrals(state: &PyPhaseState, params: &PyParams) -> (f64, f64, f64) {
    let j = integrals_real(&state.0, &params.0);
    (j.h, j.k, j.g)
}

#[pyfunction]
fn casimir_residuals(state: &PyPhaseState, params: &PyParams) -> [f64; 3] {
    core_casimir(&state.0, &params.0)
}

/// Complex coordinates `[w1, w2, w3, x1, x2, y1, y2, z1, z2]`.
#[pyfunction]
fn complexify(state: &PyPhaseState) -> [Complex64; 9] {
    let c = core_complexify(&state.0);
    [c.w1, c.w2, c.w3, c.x1, c.x2, c.y1, c.y2, c.z1, c.z2]
}

/// Integrates to `t_end`; returns times, states (9 columns), drift and Casimir residuals.
#[pyfunction]
#[pyo3(signature = (state, params, t_end, tol = 1e-12))]
fn integrate<'py>(py: Python<'py>, state: &PyPhaseState, params: &PyParams, t_end: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let tr = core_integrate(&state.0, &params.0, t_end, tol).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("times", tr.times.clone())?;
    d.set_item("states", tr.states.iter().map(|s| s.to_array()).collect::<Vec<_>>())?;
    d.set_item("drift", tr.drift.iter().map(|j| (j.h, j.k, j.g)).collect::<Vec<_>>())?;
    d.set_item("casimir", tr.casimir.clone())?;
    d.set_item("max_drift", tr.max_drift())?;
    d.set_item("max_casimir", tr.max_casimir())?;
    Ok(d)
}

/// Canonical form of a JSON problem `{"inertia","gyro","A","C"}`; returns JSON.
#[pyfunction]
fn canonicalize(problem_json: &str) -> PyResult<String> {
    let dg: DGParams = serde_json::from_str(problem_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let c = core_canonicalize(&dg).map_err(py_err)?;
    let v = serde_json::json!({
        "group": c.group,
        "problem": c.problem,
        "a": c.a,
        "b": c.b,
        "lambda": c.lambda,
        "reducible": c.reducible,
    });
    Ok(v.to_string())
}

#[pyfunction]
fn equilibria(params: &PyParams) -> Vec<PyPhaseState> {
    core_equilibria(&params.0).into_iter().map(PyPhaseState).collect()
}

#[pyfunction]
#[pyo3(signature = (family, phi, dphi, params, sign = 1.0))]
fn pendulum_state(family: &str, phi: f64, dphi: f64, params: &PyParams, sign: f64) -> PyResult<PyPhaseState> {
    let fam: PendulumFamily = family.parse().map_err(py_err)?;
    core_pendulum_state(fam, phi, dphi, sign, &params.0).map(PyPhaseState).map_err(py_err)
}

/// Real point of the critical family `"N"` or `"O"` with its residuals,
/// partial integral and momentum-map rank.
#[pyfunction]
#[pyo3(signature = (stratum, params, seed, stream = 0))]
fn seed_point<'py>(py: Python<'py>, stratum: &str, params: &PyParams, seed: u64, stream: u64) -> PyResult<Bound<'py, PyDict>> {
    let which: Stratum = stratum.parse().map_err(py_err)?;
    let cp = core_seed_point(which, &params.0, &mut rng_for(seed, stream), &SeedOptions::default()).map_err(py_err)?;
    let state = realify(&cp.state).map_err(py_err)?;
    let res = stratum_residual(which, &cp.state, &params.0);
    let rank = momentum_rank_info(&cp.state, &params.0, SVD_TOL);
    let d = PyDict::new(py);
    d.set_item("state", PyPhaseState(state))?;
    d.set_item("residuals", res.values)?;
    d.set_item("s", res.s_value)?;
    d.set_item("rank", rank.rank)?;
    d.set_item("singular_values", rank.singular_values.to_vec())?;
    Ok(d)
}

/// Norm of `L' - [L, M]` at spectral parameter `kappa`.
#[pyfunction]
fn lax_residual(state: &PyPhaseState, kappa: Complex64, params: &PyParams) -> PyResult<f64> {
    core_lax_residual(&core_complexify(&state.0), kappa, &params.0).map_err(py_err)
}

#[pyfunction]
fn lax_eigenvalues(state: &PyPhaseState, kappa: Complex64, params: &PyParams) -> PyResult<[Complex64; 4]> {
    core_lax_eigenvalues(&core_complexify(&state.0), kappa, &params.0).map_err(py_err)
}

/// `(even, odd)` deviations of the characteristic polynomial from the spectral curve.
#[pyfunction]
fn spectral_check(state: &PyPhaseState, kappa: Complex64, params: &PyParams) -> PyResult<(f64, f64)> {
    let d = spectral_check_detail(&core_complexify(&state.0), kappa, &params.0).map_err(py_err)?;
    Ok((d.even, d.odd))
}

/// Bifurcation slice at energy `h`: per-branch `(s, g, k)` samples and singular points.
#[pyfunction]
#[pyo3(signature = (params, h, per_sign = 2000))]
fn sigma_h<'py>(py: Python<'py>, params: &PyParams, h: f64, per_sign: usize) -> PyResult<Bound<'py, PyDict>> {
    let grid = SGrid { per_sign, ..SGrid::default() };
    let diagram = core_sigma_h(h, &params.0, &grid).map_err(py_err)?;
    let branches = PyDict::new(py);
    for b in Branch::ALL {
        let pts: Vec<(f64, f64, f64)> = diagram.branch_samples(b).map(|x| (x.s, x.g, x.k)).collect();
        branches.set_item(b.to_string(), pts)?;
    }
    let singular = PyDict::new(py);
    for (name, kind) in [
        ("cusp", SingularKind::Cusp),
        ("double_point", SingularKind::DoublePoint),
        ("intersection", SingularKind::Intersection),
        ("s_zero_asymptote", SingularKind::SZeroAsymptote),
    ] {
        let pts: Vec<(f64, f64)> = diagram.singular.iter().filter(|p| p.kind == kind).map(|p| (p.g, p.k)).collect();
        singular.set_item(name, pts)?;
    }
    let d = PyDict::new(py);
    d.set_item("h", h)?;
    d.set_item("branches", branches)?;
    d.set_item("singular", singular)?;
    d.set_item("rank1", diagram.rank1.iter().map(|r| (r.sigma, r.g, r.k)).collect::<Vec<_>>())?;
    Ok(d)
}

/// Acceptance suite: list of `(id, name, passed, metric, threshold)`.
#[pyfunction]
#[pyo3(signature = (seed = 2026))]
fn verify_all(py: Python<'_>, seed: u64) -> Vec<(u8, &'static str, bool, f64, f64)> {
    let cfg = VerifyConfig { seed, ..VerifyConfig::default() };
    let report = py.detach(|| core_verify_all(&cfg));
    report.criteria.iter().map(|c| (c.id, c.name, c.passed, c.metric, c.threshold)).collect()
}

#[pymodule]
fn gyrostat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyPhaseState>()?;
    m.add_function(wrap_pyfunction!(integrals, m)?)?;
    m.add_function(wrap_pyfunction!(casimir_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(complexify, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(pendulum_state, m)?)?;
    m.add_function(wrap_pyfunction!(seed_point, m)?)?;
    m.add_function(wrap_pyfunction!(lax_residual, m)?)?;
    m.add_function(wrap_pyfunction!(lax_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_check, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_h, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}
