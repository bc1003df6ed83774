//! Python bindings for the optimizer array, the simulated backend, and the
//! supporting pieces: Hamiltonian families, ansatz circuits, the GP
//! surrogate, exact references, and full experiment runs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use bois::bo;
use bois::circuit;
use bois::gp;
use bois::oracle;
use bois::orchestrator;
use bois::pauli;
use bois::stream;

fn to_py_err(e: bois::Error) -> PyErr {
    match e {
        bois::Error::Config(_) | bois::Error::Parse(_) | bois::Error::InvalidArgument(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A family of Hamiltonians over a physical-parameter grid.
#[pyclass(name = "Hamiltonian")]
struct PyHamiltonian {
    inner: pauli::ParameterizedHamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    /// Open-boundary spin chain with h_X = h_Z = h over the given 1D grid.
    #[staticmethod]
    fn spin_chain(n: usize, h_values: Vec<f64>) -> PyResult<Self> {
        let grid = pauli::PhysicalGrid::new(vec![h_values], vec!["h".into()]).map_err(to_py_err)?;
        let inner = pauli::ParameterizedHamiltonian::spin_chain(n, grid).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Spin chain over a 2D (h_X, h_Z) grid.
    #[staticmethod]
    fn spin_chain_2d(n: usize, h_x: Vec<f64>, h_z: Vec<f64>) -> PyResult<Self> {
        let grid = pauli::PhysicalGrid::new(vec![h_x, h_z], vec!["h_x".into(), "h_z".into()])
            .map_err(to_py_err)?;
        let inner = pauli::ParameterizedHamiltonian::spin_chain(n, grid).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Read a family from the standard Hamiltonian file format.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pauli::ParameterizedHamiltonian::load(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py_err)
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn num_terms(&self) -> usize {
        self.inner.num_terms()
    }

    #[getter]
    fn num_points(&self) -> usize {
        self.inner.grid().num_points()
    }

    /// Pauli labels of the shared term set, in canonical order.
    fn pauli_labels(&self) -> Vec<String> {
        self.inner.paulis().iter().map(|p| p.to_string()).collect()
    }

    /// Physical coordinates of grid point `alpha`.
    fn point(&self, alpha: usize) -> PyResult<Vec<f64>> {
        if alpha >= self.inner.grid().num_points() {
            return Err(PyValueError::new_err(format!(
                "grid index {alpha} out of range"
            )));
        }
        Ok(self.inner.grid().point(alpha))
    }

    fn coefficients(&self, alpha: usize) -> PyResult<Vec<f64>> {
        if alpha >= self.inner.grid().num_points() {
            return Err(PyValueError::new_err(format!(
                "grid index {alpha} out of range"
            )));
        }
        Ok(self.inner.coeffs_at(alpha).to_vec())
    }

    /// The cross-evaluation primitive: weight one shared expectation vector
    /// into the energy of grid point `alpha`.
    fn energy_from_expectations(&self, alpha: usize, expectations: Vec<f64>) -> PyResult<f64> {
        self.inner
            .energy_from_expectations(alpha, &expectations)
            .map_err(to_py_err)
    }

    /// Exact ground-state energy at grid point `alpha` (dense
    /// diagonalization).
    fn exact_ground_energy(&self, alpha: usize) -> PyResult<f64> {
        let dense = oracle::dense_matrix(&self.inner, alpha).map_err(to_py_err)?;
        Ok(dense.ground_state().0)
    }

    /// Exact ground energies for the whole grid.
    fn exact_ground_energies(&self) -> PyResult<Vec<f64>> {
        oracle::exact_ground_energies(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hamiltonian(n={}, terms={}, grid_points={})",
            self.inner.num_qubits(),
            self.inner.num_terms(),
            self.inner.grid().num_points()
        )
    }
}

/// A parameterized circuit in the standard ansatz file format.
#[pyclass(name = "Ansatz")]
struct PyAnsatz {
    inner: circuit::AnsatzCircuit,
}

#[pymethods]
impl PyAnsatz {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: circuit::AnsatzCircuit::load(path).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: circuit::AnsatzCircuit =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    /// Exact expectation values of the family's Pauli set at `theta`.
    fn expectations(&self, hamiltonian: &PyHamiltonian, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut rng = stream::derive_rng(0, 0);
        let set = circuit::measure_pauli_set(
            &self.inner,
            &theta,
            hamiltonian.inner.paulis(),
            circuit::Shots::Exact,
            &mut rng,
        )
        .map_err(to_py_err)?;
        Ok(set.values)
    }

    /// Shot-sampled expectation values (binomial per term) at `theta`.
    fn sampled_expectations(
        &self,
        hamiltonian: &PyHamiltonian,
        theta: Vec<f64>,
        shots: u32,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let mut rng = stream::derive_rng(seed, 0);
        let set = circuit::measure_pauli_set(
            &self.inner,
            &theta,
            hamiltonian.inner.paulis(),
            circuit::Shots::Count(shots),
            &mut rng,
        )
        .map_err(to_py_err)?;
        Ok(set.values)
    }

    /// Exact energy <psi(theta)|H(x_alpha)|psi(theta)>.
    fn energy(&self, hamiltonian: &PyHamiltonian, theta: Vec<f64>, alpha: usize) -> PyResult<f64> {
        circuit::exact_energy(&self.inner, &theta, &hamiltonian.inner, alpha).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Ansatz(n={}, d={}, gates={})",
            self.inner.num_qubits(),
            self.inner.num_params(),
            self.inner.gates().len()
        )
    }
}

/// Gaussian-process surrogate with the Matern-5/2 kernel.
#[pyclass(name = "Surrogate")]
struct PySurrogate {
    inner: gp::SurrogateModel,
}

#[pymethods]
impl PySurrogate {
    /// Fit hyperparameters by marginal likelihood; `fixed_noise` pins the
    /// noise variance instead of fitting it.
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, fixed_noise=None))]
    fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, fixed_noise: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: gp::SurrogateModel::fit(&inputs, &targets, fixed_noise).map_err(to_py_err)?,
        })
    }

    /// Posterior (mean, variance) in raw target units.
    fn predict(&self, theta: Vec<f64>) -> PyResult<(f64, f64)> {
        if theta.len() != self.inner.dims() {
            return Err(PyValueError::new_err(format!(
                "query has {} dimensions, model has {}",
                theta.len(),
                self.inner.dims()
            )));
        }
        Ok(self.inner.predict(&theta))
    }

    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    /// Fitted (signal_variance, lengthscale, noise_variance).
    fn kernel_params(&self) -> (f64, f64, f64) {
        let p = self.inner.kernel_params();
        (p.signal_variance, p.lengthscale, p.noise_variance)
    }

    fn __repr__(&self) -> String {
        let p = self.inner.kernel_params();
        format!(
            "Surrogate(m={}, d={}, signal_variance={:.4}, lengthscale={:.4}, noise={:.2e})",
            self.inner.num_data(),
            self.inner.dims(),
            p.signal_variance,
            p.lengthscale,
            p.noise_variance
        )
    }
}

/// Matern-5/2 covariance at distance `r`.
#[pyfunction]
fn matern52(r: f64, signal_variance: f64, lengthscale: f64) -> PyResult<f64> {
    let params = gp::KernelParams::new(signal_variance, lengthscale, 0.0).map_err(to_py_err)?;
    Ok(gp::matern52(r, &params))
}

/// Latin hypercube design of `m` points in `[0, 2pi]^d`.
#[pyfunction]
fn lhs_sample(m: usize, d: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(PyValueError::new_err("need at least one sample"));
    }
    let bounds = bo::BoundsBox::full_period(d).map_err(to_py_err)?;
    let mut rng = stream::derive_rng(seed, 0);
    Ok(bo::lhs_sample(m, &bounds, &mut rng))
}

/// The linearly decaying exploration weight kappa_t = kappa0 (N - t) / N.
#[pyfunction]
fn kappa(t: usize, n_total: usize, kappa0: f64) -> PyResult<f64> {
    if !(1..=n_total).contains(&t) {
        return Err(PyValueError::new_err(format!(
            "iteration {t} outside [1, {n_total}]"
        )));
    }
    Ok(bo::kappa(t, n_total, kappa0))
}

/// Run one optimizer-array experiment from a JSON run configuration (the
/// `RunConfig` schema: strategy, backend, initial_points, iterations,
/// kappa0, shot counts, seed). Returns the full result document as JSON.
#[pyfunction]
#[pyo3(signature = (hamiltonian, ansatz, config_json, workers=None))]
fn run_experiment(
    py: Python<'_>,
    hamiltonian: &PyHamiltonian,
    ansatz: &PyAnsatz,
    config_json: &str,
    workers: Option<usize>,
) -> PyResult<String> {
    let config: orchestrator::RunConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let h = hamiltonian.inner.clone();
    let a = ansatz.inner.clone();
    let result = py
        .allow_threads(move || -> bois::Result<orchestrator::RunResult> {
            match workers {
                Some(w) if w > 0 => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(w)
                        .build()
                        .map_err(|e| bois::Error::Config(format!("worker pool: {e}")))?;
                    pool.install(|| orchestrator::run(&h, &a, config))
                }
                _ => orchestrator::run(&h, &a, config),
            }
        })
        .map_err(to_py_err)?;
    serde_json::to_string(&result).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn bois_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyAnsatz>()?;
    m.add_class::<PySurrogate>()?;
    m.add_function(wrap_pyfunction!(matern52, m)?)?;
    m.add_function(wrap_pyfunction!(lhs_sample, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
