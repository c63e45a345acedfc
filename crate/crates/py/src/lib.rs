//! Python module `regdist`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use regdist_core::bmo::{self, BmoFunction};
use regdist_core::geometry::{self, MeasureSpec};
use regdist_core::{linearized, potentials, special, DiscreteMeasure, Field};

fn py_err(e: regdist_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "GeometryParams", frozen)]
struct PyParams(regdist_core::GeometryParams);

#[pymethods]
impl PyParams {
    #[new]
    fn new(n: usize, d: f64, alpha: f64) -> PyResult<Self> {
        regdist_core::GeometryParams::new(n, d, alpha).map(PyParams).map_err(py_err)
    }

    /// Parameters at the magic exponent `α = n - d - 2`.
    #[staticmethod]
    fn magic(n: usize, d: f64) -> PyResult<Self> {
        regdist_core::GeometryParams::magic(n, d).map(PyParams).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn d(&self) -> f64 {
        self.0.d()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn magic_alpha(&self) -> f64 {
        self.0.magic_alpha()
    }

    fn is_magic(&self) -> bool {
        self.0.is_magic()
    }

    fn __repr__(&self) -> String {
        format!("GeometryParams(n={}, d={}, alpha={})", self.0.n(), self.0.d(), self.0.alpha())
    }
}

/// A discretized measure built from a JSON measure spec.
#[pyclass(name = "Measure", frozen)]
struct PyMeasure(DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    /// Builds from a spec such as `{"kind": "cantor", "n": 3, ...}`.
    #[staticmethod]
    fn from_json(spec: &str) -> PyResult<Self> {
        let spec: MeasureSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.build().map(PyMeasure).map_err(py_err)
    }

    /// Flat `d`-plane in `R^n` with density expression `density`.
    #[staticmethod]
    #[pyo3(signature = (n, d, density="1", truncation=50.0, cell=0.05))]
    fn flat(n: usize, d: usize, density: &str, truncation: f64, cell: f64) -> PyResult<Self> {
        let f = Field::parse(density).map_err(py_err)?;
        geometry::flat_measure(d, n, f, truncation, cell).map(PyMeasure).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, ratio, branches, depth, embed_dim=1))]
    fn cantor(n: usize, ratio: f64, branches: usize, depth: u32, embed_dim: usize) -> PyResult<Self> {
        geometry::cantor_measure(n, ratio, branches, depth, embed_dim).map(PyMeasure).map_err(py_err)
    }

    #[staticmethod]
    fn random_cloud(n: usize, d: f64, count: usize, seed: u64) -> PyResult<Self> {
        geometry::random_cloud(n, d, count, seed).map(PyMeasure).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.0.ambient_dim()
    }

    #[getter]
    fn dim(&self) -> f64 {
        self.0.dim()
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    fn distance_to_support(&self, x: Vec<f64>) -> PyResult<f64> {
        geometry::distance_to_support(&self.0, &x).map_err(py_err)
    }

    fn smooth_distance(&self, params: &PyParams, x: Vec<f64>) -> PyResult<f64> {
        potentials::smooth_distance(&self.0, &params.0, &x).map_err(py_err)
    }

    fn newton_potential(&self, params: &PyParams, x: Vec<f64>) -> PyResult<f64> {
        potentials::newton_potential(&self.0, &params.0, None, &x).map_err(py_err)
    }
}

/// Constants ledger as a dict; undefined entries are `None`.
#[pyfunction]
fn ledger(params: &PyParams) -> BTreeMap<&'static str, Option<f64>> {
    special::ledger(&params.0).entries().into_iter().collect()
}

/// Closed-form smooth distance at height `delta` above a flat plane of density `rho`.
#[pyfunction]
fn flat_smooth_distance(params: &PyParams, rho: f64, delta: f64) -> f64 {
    potentials::flat_smooth_distance(&params.0, rho, delta)
}

#[pyfunction]
fn gamma_fn(x: f64) -> PyResult<f64> {
    special::gamma_fn(x).map_err(py_err)
}

#[pyfunction]
fn bessel_k(nu: f64, z: f64) -> PyResult<f64> {
    special::bessel_k(nu, z).map_err(py_err)
}

/// Fourier transform of `|x|^{-a}` on `R^d` at frequency `z`.
#[pyfunction]
fn bessel_ft(a: f64, d: f64, z: f64) -> PyResult<f64> {
    linearized::bessel_ft(a, d, z).map_err(py_err)
}

#[pyfunction]
fn asymptotic_constants(params: &PyParams) -> BTreeMap<&'static str, Option<f64>> {
    let c = linearized::asymptotic_constants(&params.0);
    BTreeMap::from([
        ("cf", Some(c.cf)),
        ("cg", c.cg),
        ("cf_prime", Some(c.cf_prime)),
        ("cg_prime", c.cg_prime),
    ])
}

/// `"families_excluded"`, `"magic_degenerate"` or `"d1_degenerate"`.
#[pyfunction]
fn family_criterion(params: &PyParams) -> PyResult<&'static str> {
    linearized::family_criterion(&params.0).map(|v| v.as_str()).map_err(py_err)
}

/// Dyadic-ball BMO norm estimate of `expr` on `[-radius, radius]^dim`.
#[pyfunction]
#[pyo3(signature = (expr, dim, depth=6, radius=4.0))]
fn bmo_norm(expr: &str, dim: usize, depth: u32, radius: f64) -> PyResult<f64> {
    let field = Field::parse(expr).map_err(py_err)?;
    let f = BmoFunction::new(field, dim).map_err(py_err)?;
    bmo::bmo_norm(&f, depth, radius).map(|e| e.norm_estimate).map_err(py_err)
}

#[pymodule]
fn regdist(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(ledger, m)?)?;
    m.add_function(wrap_pyfunction!(flat_smooth_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_fn, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_ft, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_constants, m)?)?;
    m.add_function(wrap_pyfunction!(family_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(bmo_norm, m)?)?;
    Ok(())
}
