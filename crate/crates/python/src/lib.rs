//! Python bindings. Results with structure come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use wproj_core::cohomology::{real_profile, CohomologyRing};
use wproj_core::flow::{self, FixedPointOptions, FlowOptions};
use wproj_core::hamiltonian::HamiltonianSpec;
use wproj_core::spectrum::{self, Interval};
use wproj_core::variational::{self, FourierLoop, LoopMode, SolverOptions};
use wproj_core::{Error, LiftedHamiltonian, QuadraticHamiltonian, SpherePoint, C64};

fn err(e: Error) -> PyErr {
    match e {
        Error::Integration { .. } | Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// Weight vector `q = (q_0, ..., q_n)` of positive integers.
#[pyclass(frozen, skip_from_py_object, module = "wproj")]
#[derive(Clone)]
struct Weights(wproj_core::WeightVector);

#[pymethods]
impl Weights {
    #[new]
    fn new(q: Vec<u64>) -> PyResult<Self> {
        wproj_core::WeightVector::new(q).map(Weights).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn as_list(&self) -> Vec<u64> {
        self.0.as_slice().to_vec()
    }

    fn cohomology(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &CohomologyRing::new(&self.0).map_err(err)?)
    }

    fn real_profile(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &real_profile(&self.0))
    }

    #[pyo3(signature = (lo, hi, closed = false))]
    fn spectrum(&self, py: Python<'_>, lo: f64, hi: f64, closed: bool) -> PyResult<Py<PyAny>> {
        let shape = if closed { Interval::Closed } else { Interval::HalfOpen };
        to_py(py, &spectrum::eigenvalues_in(&self.0, lo, hi, shape).map_err(err)?)
    }

    fn mu(&self, m: usize) -> PyResult<f64> {
        spectrum::mu(&self.0, m).map_err(err)
    }

    fn certificate(&self, py: Python<'_>, bound: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &spectrum::counting_certificate(&self.0, bound).map_err(err)?)
    }

    fn moment_map(&self, z: Vec<C64>) -> PyResult<f64> {
        wproj_core::geometry::moment_map(&z, &self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Weights({:?})", self.0.as_slice())
    }
}

/// Lifted invariant Hamiltonian on `C^{n+1}`.
#[pyclass(frozen, module = "wproj")]
struct Hamiltonian(LiftedHamiltonian);

#[pymethods]
impl Hamiltonian {
    /// Parses `{"weights": [..], "terms": [..]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        HamiltonianSpec::from_json(text).and_then(|s| s.lift()).map(Hamiltonian).map_err(err)
    }

    /// `Σ a_j |z_j|^2`.
    #[staticmethod]
    fn quadratic(weights: &Weights, a: Vec<f64>) -> PyResult<Self> {
        QuadraticHamiltonian::new(a).lift(&weights.0).map(Hamiltonian).map_err(err)
    }

    #[staticmethod]
    fn zero(weights: &Weights) -> Self {
        Hamiltonian(LiftedHamiltonian::zero(&weights.0))
    }

    #[getter]
    fn weights(&self) -> Weights {
        Weights(self.0.weights().clone())
    }

    #[pyo3(signature = (z, t = 0.0))]
    fn __call__(&self, z: Vec<C64>, t: f64) -> PyResult<f64> {
        self.check_len(&z)?;
        Ok(self.0.evaluate(&z, t))
    }

    #[pyo3(signature = (z, t = 0.0))]
    fn gradient(&self, z: Vec<C64>, t: f64) -> PyResult<Vec<C64>> {
        self.check_len(&z)?;
        Ok(self.0.gradient(&z, t))
    }

    fn bound(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.bound())
    }

    /// Endpoint of the lifted flow over `[0, 1]` with rotation speed `lam`.
    #[pyo3(signature = (z0, lam = 0.0))]
    fn flow(&self, py: Python<'_>, z0: Vec<C64>, lam: f64) -> PyResult<Py<PyAny>> {
        let p = SpherePoint::new(wproj_core::AmbientPoint::new(z0).map_err(err)?, self.0.weights(), 1e-9)
            .map_err(err)?;
        let res = py.detach(|| flow::integrate(&self.0, lam, &p, &FlowOptions::default())).map_err(err)?;
        to_py(py, &res)
    }

    #[pyo3(signature = (seeds = None))]
    fn fixed_points(&self, py: Python<'_>, seeds: Option<usize>) -> PyResult<Py<PyAny>> {
        let q = self.0.weights();
        let count = seeds.unwrap_or(64 * q.len());
        let found = py.detach(|| {
            let seeds = flow::sphere_seeds(q, count);
            flow::search_fixed_points(&self.0, &seeds, &FixedPointOptions::default())
        });
        to_py(py, &found)
    }

    /// Enumerates constrained critical loops (`mode` is "periodic" or "chord").
    #[pyo3(signature = (mode = "periodic", m = 16, budget = 256, seed = 0))]
    fn enumerate(&self, py: Python<'_>, mode: &str, m: usize, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let mode: LoopMode = mode.parse().map_err(err)?;
        let opts = SolverOptions { seed, ..SolverOptions::default() };
        let res = py.detach(|| variational::enumerate_solutions(&self.0, mode, m, budget, &opts)).map_err(err)?;
        to_py(py, &res)
    }

    /// Solves from the eigenloop `e^{ω k t} e_j` of order `m`.
    #[pyo3(signature = (k, j, mode = "periodic", m = 16))]
    fn solve_from_eigen(&self, py: Python<'_>, k: i64, j: usize, mode: &str, m: usize) -> PyResult<Py<PyAny>> {
        let mode: LoopMode = mode.parse().map_err(err)?;
        let seed = FourierLoop::eigen(mode, m, self.0.weights(), k, j).map_err(err)?;
        let res = py
            .detach(|| variational::solve_critical(&self.0, &seed, &SolverOptions::default()))
            .map_err(err)?;
        to_py(py, &res)
    }
}

impl Hamiltonian {
    fn check_len(&self, z: &[C64]) -> PyResult<()> {
        if z.len() != self.0.weights().len() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.0.weights().len(),
                z.len()
            )));
        }
        Ok(())
    }
}

#[pymodule]
fn wproj(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Weights>()?;
    m.add_class::<Hamiltonian>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
