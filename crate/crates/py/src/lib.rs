//! Python bindings for `kr-core`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kr_core::experiments;
use kr_core::{GridReference, PathMeasure, QuantileProcess};

fn err(e: kr_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Finitely supported law of a path of `steps` values in `R^dim`.
#[pyclass(name = "PathMeasure", module = "krpy", frozen)]
struct PyPathMeasure {
    inner: PathMeasure,
}

#[pymethods]
impl PyPathMeasure {
    /// `atoms` holds one flattened path per atom (`steps * dim` numbers).
    #[new]
    #[pyo3(signature = (atoms, weights, dim = 1))]
    fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, dim: usize) -> PyResult<Self> {
        let len = atoms.first().map_or(0, Vec::len);
        if dim == 0 || !len.is_multiple_of(dim) {
            return Err(PyValueError::new_err("atom length must be a multiple of dim"));
        }
        let inner = PathMeasure::new(dim, len / dim.max(1), atoms, weights).map_err(err)?;
        Ok(PyPathMeasure { inner })
    }

    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(PyPathMeasure { inner: kr_core::parse_measure(doc).map_err(err)? })
    }

    fn to_json(&self) -> String {
        kr_core::serialize_measure(&self.inner)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn atoms(&self) -> Vec<Vec<f64>> {
        self.inner.atoms().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn total_variation(&self, other: &PyPathMeasure) -> PyResult<f64> {
        self.inner.total_variation(&other.inner).map_err(err)
    }

    fn is_markov(&self) -> bool {
        kr_core::is_markov(&self.inner, 1e-9)
    }

    fn is_martingale(&self) -> bool {
        kr_core::is_martingale(&self.inner, 1e-9)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &PyPathMeasure) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("PathMeasure(d={}, N={}, atoms={})", self.inner.dim(), self.inner.steps(), self.inner.len())
    }
}

/// Quantile process of a scalar path measure.
#[pyclass(name = "QuantileProcess", module = "krpy", frozen)]
struct PyQuantileProcess {
    inner: QuantileProcess,
}

#[pymethods]
impl PyQuantileProcess {
    #[new]
    fn new(mu: &PyPathMeasure) -> PyResult<Self> {
        Ok(PyQuantileProcess { inner: kr_core::quantile_process(&mu.inner).map_err(err)? })
    }

    fn __call__(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        if u.len() != self.inner.steps() || u.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return Err(PyValueError::new_err(format!("expected {} values in (0, 1)", self.inner.steps())));
        }
        Ok(self.inner.eval(&u))
    }

    fn pushforward(&self) -> PyResult<PyPathMeasure> {
        Ok(PyPathMeasure { inner: kr_core::pushforward(&self.inner).map_err(err)? })
    }

    /// `L_p` distance between two processes on the unit cube.
    #[pyo3(signature = (other, p = 1.0))]
    fn distance(&self, other: &PyQuantileProcess, p: f64) -> PyResult<f64> {
        kr_core::map_distance(&self.inner, &other.inner, p).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

#[pyfunction]
#[pyo3(signature = (mu, nu, p = 1.0))]
fn kr_distance(mu: &PyPathMeasure, nu: &PyPathMeasure, p: f64) -> PyResult<f64> {
    kr_core::kr_distance(&mu.inner, &nu.inner, p).map_err(err)
}

/// Knothe–Rosenblatt coupling as `(i, j, mass)` triples over atom indices.
#[pyfunction]
fn kr_coupling(mu: &PyPathMeasure, nu: &PyPathMeasure) -> PyResult<Vec<(usize, usize, f64)>> {
    Ok(kr_core::kr_coupling(&mu.inner, &nu.inner).map_err(err)?.pairs().to_vec())
}

#[pyfunction]
#[pyo3(signature = (mu, nu, p = 1.0))]
fn aw_distance(mu: &PyPathMeasure, nu: &PyPathMeasure, p: f64) -> PyResult<f64> {
    Ok(kr_core::aw_distance(&mu.inner, &nu.inner, p).map_err(err)?.value)
}

#[pyfunction]
#[pyo3(signature = (mu, nu, p = 1.0))]
fn aw_bruteforce(mu: &PyPathMeasure, nu: &PyPathMeasure, p: f64) -> PyResult<f64> {
    kr_core::aw_bruteforce(&mu.inner, &nu.inner, p).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mu, nu, p = 1.0))]
fn w_distance(mu: &PyPathMeasure, nu: &PyPathMeasure, p: f64) -> PyResult<f64> {
    kr_core::w_distance(&mu.inner, &nu.inner, p).map_err(err)
}

#[pyfunction]
fn adapted_variation(mu: &PyPathMeasure, nu: &PyPathMeasure) -> PyResult<f64> {
    kr_core::adapted_variation(&mu.inner, &nu.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (measures, coeffs, p = 2.0))]
fn barycenter(measures: Vec<PyRef<'_, PyPathMeasure>>, coeffs: Vec<f64>, p: f64) -> PyResult<PyPathMeasure> {
    let ms: Vec<PathMeasure> = measures.iter().map(|m| m.inner.clone()).collect();
    Ok(PyPathMeasure { inner: kr_core::barycenter(&ms, &coeffs, p).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (mu0, mu1, t, p = 2.0))]
fn geodesic_point(mu0: &PyPathMeasure, mu1: &PyPathMeasure, t: f64, p: f64) -> PyResult<PyPathMeasure> {
    Ok(PyPathMeasure { inner: kr_core::geodesic_point(&mu0.inner, &mu1.inner, t, p).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (mu, k, delta, p = 2.0))]
fn stage_modulus(mu: &PyPathMeasure, k: usize, delta: f64, p: f64) -> PyResult<f64> {
    kr_core::stage_modulus(&mu.inner, k, delta, p).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mu, awdist, p = 2.0))]
fn equivalence_bound(mu: &PyPathMeasure, awdist: f64, p: f64) -> PyResult<f64> {
    kr_core::equivalence_bound(&mu.inner, awdist, p, None).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mu, nu, grid = 8, p = 2.0))]
fn kr_distance_multi(mu: &PyPathMeasure, nu: &PyPathMeasure, grid: usize, p: f64) -> PyResult<f64> {
    let g = GridReference::new(mu.inner.dim(), grid).map_err(err)?;
    kr_core::kr_distance_multi(&mu.inner, &nu.inner, &g, p).map_err(err)
}

/// `(value, all_stage_optima_unique)`.
#[pyfunction]
#[pyo3(signature = (mu, nu, p = 1.0))]
fn tilde_kr(mu: &PyPathMeasure, nu: &PyPathMeasure, p: f64) -> PyResult<(f64, bool)> {
    let (v, diag) = kr_core::tilde_kr(&mu.inner, &nu.inner, p).map_err(err)?;
    Ok((v, diag.all_unique()))
}

#[pyfunction]
fn counterexample_measures(eps: f64) -> PyResult<(PyPathMeasure, PyPathMeasure, PyPathMeasure)> {
    let (a, b, c) = kr_core::counterexample_measures(eps).map_err(err)?;
    Ok((PyPathMeasure { inner: a }, PyPathMeasure { inner: b }, PyPathMeasure { inner: c }))
}

/// Runs a named experiment with default parameters; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (name, p = 1.0))]
fn run_experiment(name: &str, p: f64) -> PyResult<String> {
    let rep = match name {
        "compare1" => experiments::compare1(6, 4, p),
        "compare2" => experiments::compare2(8, p),
        "markov" => experiments::markov(p),
        "triangle" => experiments::triangle(&[0.1, 0.5, 1.0], p),
        "bogachev" => experiments::bogachev(6, 3, p),
        other => return Err(PyValueError::new_err(format!("unknown experiment {other:?}"))),
    }
    .map_err(err)?;
    Ok(rep.to_json())
}

#[pymodule]
fn krpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPathMeasure>()?;
    m.add_class::<PyQuantileProcess>()?;
    m.add_function(wrap_pyfunction!(kr_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kr_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(aw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(aw_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(w_distance, m)?)?;
    m.add_function(wrap_pyfunction!(adapted_variation, m)?)?;
    m.add_function(wrap_pyfunction!(barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_point, m)?)?;
    m.add_function(wrap_pyfunction!(stage_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kr_distance_multi, m)?)?;
    m.add_function(wrap_pyfunction!(tilde_kr, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_measures, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
