//! Python bindings for the triple-bracket engine.
//!
//! Complex matrices cross the boundary as nested lists of Python complex
//! numbers (row-major, square); wrap them in `numpy.array(...)` on the
//! Python side when convenient. All constructors validate exactly like
//! their Rust counterparts and raise `ValueError` with the same messages.

use ndarray::Array2;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nambu_core as core;
use nambu_core::C64;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_array(matrix: Vec<Vec<Complex64>>) -> PyResult<Array2<C64>> {
    let n = matrix.len();
    if n == 0 {
        return Err(value_err("matrix must be non-empty"));
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(value_err(format!(
                "matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, z) in row.iter().enumerate() {
            out[(i, j)] = *z;
        }
    }
    Ok(out)
}

fn to_lists(a: &Array2<C64>) -> Vec<Vec<Complex64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

fn parse_scheme(scheme: &str) -> PyResult<core::Scheme> {
    match scheme {
        "rk4" => Ok(core::Scheme::Rk4),
        "midpoint" => Ok(core::Scheme::Midpoint),
        other => Err(value_err(format!(
            "unknown scheme `{other}` (use \"rk4\" or \"midpoint\")"
        ))),
    }
}

fn parse_path(path: &str) -> PyResult<core::BracketPath> {
    match path {
        "chain" => Ok(core::BracketPath::Chain),
        "oracle" => Ok(core::BracketPath::Oracle),
        other => Err(value_err(format!(
            "unknown bracket path `{other}` (use \"chain\" or \"oracle\")"
        ))),
    }
}

/// Hermitian, invertible, generally indefinite metric `g[α][α']`.
#[pyclass(frozen)]
struct Metric {
    inner: core::Metric,
}

#[pymethods]
impl Metric {
    /// Diagonal metric of ±1 entries.
    #[staticmethod]
    fn from_signature(label: &str, signs: Vec<i32>) -> PyResult<Self> {
        Ok(Metric {
            inner: core::Metric::from_signature(label, &signs).map_err(value_err)?,
        })
    }

    /// Validated Hermitian metric from an explicit matrix.
    #[staticmethod]
    fn from_matrix(label: &str, matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let g = to_array(matrix)?;
        let space = core::IndexSpace::new(label, g.nrows()).map_err(value_err)?;
        Ok(Metric {
            inner: core::Metric::from_matrix(space, g).map_err(value_err)?,
        })
    }

    /// The lattice metric `I ⊗ g₄` of an `nt × nz` bispinor lattice.
    #[staticmethod]
    #[pyo3(signature = (nt, nz, spacing = 1.0))]
    fn dirac_lattice(nt: usize, nz: usize, spacing: f64) -> PyResult<Self> {
        let spec = core::dirac::LatticeSpec::new(nt, nz, spacing).map_err(value_err)?;
        Ok(Metric {
            inner: core::dirac::lattice_metric(&spec).map_err(value_err)?,
        })
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn condition_number(&self) -> f64 {
        self.inner.condition_number()
    }

    fn g(&self) -> Vec<Vec<Complex64>> {
        to_lists(self.inner.g())
    }

    fn ginv(&self) -> Vec<Vec<Complex64>> {
        to_lists(self.inner.ginv())
    }

    fn __repr__(&self) -> String {
        format!(
            "Metric(label='{}', dim={}, cond={:.3e})",
            self.inner.space().label(),
            self.inner.dim(),
            self.inner.condition_number()
        )
    }
}

/// Hermitian coordinate array `ρ[α][α']` over a metric's index space.
#[pyclass(frozen)]
struct DensityState {
    inner: core::DensityState,
}

#[pymethods]
impl DensityState {
    /// Validated Hermitian state from an explicit matrix.
    #[staticmethod]
    fn from_matrix(metric: &Metric, matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let m = to_array(matrix)?;
        Ok(DensityState {
            inner: core::DensityState::new(metric.inner.space().clone(), m)
                .map_err(value_err)?,
        })
    }

    /// Seeded random Hermitian state (ChaCha8 stream).
    #[staticmethod]
    fn random(metric: &Metric, seed: u64) -> Self {
        DensityState {
            inner: core::DensityState::random(metric.inner.space().clone(), seed),
        }
    }

    /// Rank-one state `ψ ψ†` from amplitudes.
    #[staticmethod]
    fn pure(metric: &Metric, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        Ok(DensityState {
            inner: core::DensityState::pure(metric.inner.space().clone(), &amplitudes)
                .map_err(value_err)?,
        })
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        to_lists(self.inner.matrix())
    }

    fn hermiticity_residual(&self) -> f64 {
        self.inner.hermiticity_residual()
    }

    fn __repr__(&self) -> String {
        format!("DensityState(dim={})", self.inner.dim())
    }
}

/// Observable: linear coordinate functional, Casimir polynomial, weighted
/// sum, or subsystem restriction.
#[pyclass(frozen)]
struct Observable {
    inner: core::Observable,
}

#[pymethods]
impl Observable {
    /// `F(ρ) = Σ h[α][α'] ρ[α][α']` with Hermitian coefficients.
    #[staticmethod]
    fn linear(matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        Ok(Observable {
            inner: core::Observable::linear(to_array(matrix)?).map_err(value_err)?,
        })
    }

    /// The Casimir `C_n`, `n` in 1..=4.
    #[staticmethod]
    fn casimir(n: usize) -> PyResult<Self> {
        Ok(Observable {
            inner: core::Observable::casimir(n).map_err(value_err)?,
        })
    }

    /// The distinguished generator `C₂/2` (linear von Neumann regime).
    #[staticmethod]
    fn half_c2() -> Self {
        Observable {
            inner: core::Observable::half_c2(),
        }
    }

    /// Polynomial in the Casimirs: terms are `(coefficient, [p1, p2, p3, p4])`
    /// meaning `coefficient · C₁^p1 · C₂^p2 · C₃^p3 · C₄^p4`.
    #[staticmethod]
    fn casimir_poly(terms: Vec<(f64, [u32; 4])>) -> Self {
        let terms = terms
            .into_iter()
            .map(|(coefficient, powers)| core::CasimirTerm {
                coefficient,
                powers,
            })
            .collect();
        Observable {
            inner: core::Observable::CasimirPoly(core::CasimirPoly::new(terms)),
        }
    }

    /// Real-weighted sum of observables.
    #[staticmethod]
    fn sum(py: Python<'_>, parts: Vec<(f64, Py<Observable>)>) -> Self {
        let parts = parts
            .into_iter()
            .map(|(w, o)| (w, o.borrow(py).inner.clone()))
            .collect();
        Observable {
            inner: core::Observable::Sum(parts),
        }
    }

    /// Observable of the reduction of a composite state to the particles in
    /// `keep` (strictly increasing indices into `particles`).
    #[staticmethod]
    fn subsystem(
        py: Python<'_>,
        particles: Vec<Py<Metric>>,
        keep: Vec<usize>,
        inner: &Observable,
    ) -> Self {
        let metrics = particles
            .into_iter()
            .map(|m| m.borrow(py).inner.clone())
            .collect();
        Observable {
            inner: core::Observable::Subsystem {
                metrics,
                keep,
                inner: Box::new(inner.inner.clone()),
            },
        }
    }
}

/// A recorded trajectory of the bracket flow.
#[pyclass(frozen)]
struct Trajectory {
    inner: core::Trajectory,
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// The k-th recorded sample as a dict with keys `index`, `s`, `state`,
    /// `casimirs`, `hermiticity_residual`, `eigenvalues`.
    fn sample<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyDict>> {
        let sample = self
            .inner
            .samples
            .get(k)
            .ok_or_else(|| value_err(format!("sample index {k} out of range")))?;
        let dict = PyDict::new(py);
        dict.set_item("index", sample.index)?;
        dict.set_item("s", sample.s)?;
        dict.set_item("state", to_lists(sample.state.matrix()))?;
        dict.set_item("casimirs", sample.casimirs.to_vec())?;
        dict.set_item("hermiticity_residual", sample.hermiticity_residual)?;
        dict.set_item("eigenvalues", sample.eigenvalues.clone())?;
        Ok(dict)
    }

    fn final_state(&self) -> DensityState {
        DensityState {
            inner: self.inner.last().state.clone(),
        }
    }

    /// Drift maxima over the run: `max_casimir_drift` (list of 4),
    /// `max_hermiticity_residual`, `max_spectral_drift`, `final_s`, `samples`.
    fn drift_summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = core::drift_report(&self.inner).map_err(value_err)?;
        let dict = PyDict::new(py);
        dict.set_item("max_casimir_drift", report.max_casimir_drift.to_vec())?;
        dict.set_item("max_hermiticity_residual", report.max_hermiticity_residual)?;
        dict.set_item("max_spectral_drift", report.max_spectral_drift)?;
        dict.set_item("final_s", report.final_s)?;
        dict.set_item("samples", report.samples)?;
        Ok(dict)
    }
}

/// Evaluate an observable at a state.
#[pyfunction]
fn evaluate(f: &Observable, metric: &Metric, state: &DensityState) -> PyResult<Complex64> {
    core::evaluate(&f.inner, &metric.inner, &state.inner).map_err(value_err)
}

/// The Casimir `C_n = Tr[(ρ·G⁻¹)ⁿ]`.
#[pyfunction]
fn casimir(metric: &Metric, state: &DensityState, n: usize) -> PyResult<Complex64> {
    core::casimir(&metric.inner, &state.inner, n).map_err(value_err)
}

/// Upper-index gradient `δF/δρ` as a matrix.
#[pyfunction]
fn gradient(
    f: &Observable,
    metric: &Metric,
    state: &DensityState,
) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(to_lists(
        &core::gradient_matrix(&f.inner, &metric.inner, &state.inner).map_err(value_err)?,
    ))
}

/// Max relative error of the analytic gradient against central differences.
#[pyfunction]
fn fd_gradient_check(f: &Observable, metric: &Metric, state: &DensityState) -> PyResult<f64> {
    Ok(
        core::fd_gradient_check(&f.inner, &metric.inner, &state.inner)
            .map_err(value_err)?
            .max_relative_error,
    )
}

/// The triple bracket `{F, H, S}` at a state.
#[pyfunction]
#[pyo3(signature = (metric, state, f, h, s, path = "chain"))]
fn lie_nambu(
    metric: &Metric,
    state: &DensityState,
    f: &Observable,
    h: &Observable,
    s: &Observable,
    path: &str,
) -> PyResult<Complex64> {
    Ok(core::lie_nambu(
        &metric.inner,
        &state.inner,
        &f.inner,
        &h.inner,
        &s.inner,
        parse_path(path)?,
    )
    .map_err(value_err)?
    .value)
}

/// The Lie-Poisson bracket `{F, H}` at a state.
#[pyfunction]
#[pyo3(signature = (metric, state, f, h, path = "chain"))]
fn lie_poisson(
    metric: &Metric,
    state: &DensityState,
    f: &Observable,
    h: &Observable,
    path: &str,
) -> PyResult<Complex64> {
    Ok(core::lie_poisson(
        &metric.inner,
        &state.inner,
        &f.inner,
        &h.inner,
        parse_path(path)?,
    )
    .map_err(value_err)?
    .value)
}

/// Integrate `i ∂ₛρ = {ρ, H, S}` from `state` and record samples.
#[pyfunction]
#[pyo3(signature = (metric, state, h, s, step, steps, sample_every = 1, scheme = "rk4"))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    metric: &Metric,
    state: &DensityState,
    h: &Observable,
    s: &Observable,
    step: f64,
    steps: usize,
    sample_every: usize,
    scheme: &str,
) -> PyResult<Trajectory> {
    let config = core::IntegratorConfig::new(parse_scheme(scheme)?, step, steps, sample_every)
        .map_err(value_err)?;
    Ok(Trajectory {
        inner: core::evolve(&metric.inner, &state.inner, &h.inner, &s.inner, config)
            .map_err(value_err)?,
    })
}

/// Kronecker-product metric of a list of particle metrics.
#[pyfunction]
fn kron_metric(py: Python<'_>, particles: Vec<Py<Metric>>) -> PyResult<Metric> {
    let metrics: Vec<core::Metric> = particles
        .into_iter()
        .map(|m| m.borrow(py).inner.clone())
        .collect();
    Ok(Metric {
        inner: core::kron_metric(&metrics).map_err(value_err)?,
    })
}

/// Kronecker product of single-particle states.
#[pyfunction]
fn product_state(py: Python<'_>, states: Vec<Py<DensityState>>) -> PyResult<DensityState> {
    let inner: Vec<core::DensityState> = states
        .into_iter()
        .map(|s| s.borrow(py).inner.clone())
        .collect();
    Ok(DensityState {
        inner: core::product_state(&inner).map_err(value_err)?,
    })
}

/// Reduce a composite state to the particles in `keep`; returns the
/// subsystem's `(metric, state)`.
#[pyfunction]
fn reduce_state(
    py: Python<'_>,
    particles: Vec<Py<Metric>>,
    keep: Vec<usize>,
    state: &DensityState,
) -> PyResult<(Metric, DensityState)> {
    let metrics: Vec<core::Metric> = particles
        .into_iter()
        .map(|m| m.borrow(py).inner.clone())
        .collect();
    let (metric, reduced) =
        core::reduce_state(&metrics, &keep, &state.inner).map_err(value_err)?;
    Ok((Metric { inner: metric }, DensityState { inner: reduced }))
}

/// The `(metric, hamiltonian)` pair of an `nt × nz` bispinor lattice.
#[pyfunction]
#[pyo3(signature = (nt, nz, spacing = 1.0))]
fn dirac_system(nt: usize, nz: usize, spacing: f64) -> PyResult<(Metric, Observable)> {
    let spec = core::dirac::LatticeSpec::new(nt, nz, spacing).map_err(value_err)?;
    let (metric, hamiltonian) = core::dirac::dirac_system(&spec).map_err(value_err)?;
    Ok((
        Metric { inner: metric },
        Observable { inner: hamiltonian },
    ))
}

/// Integrate the pure-state lattice equation `∂ₛψ = 𝒟ψ`; returns a list of
/// `(s, amplitudes, charge_form)` samples.
#[pyfunction]
#[pyo3(signature = (nt, nz, psi, step, steps, sample_every = 1, spacing = 1.0, scheme = "rk4"))]
#[allow(clippy::too_many_arguments)]
fn dirac_pure_evolve(
    nt: usize,
    nz: usize,
    psi: Vec<Complex64>,
    step: f64,
    steps: usize,
    sample_every: usize,
    spacing: f64,
    scheme: &str,
) -> PyResult<Vec<(f64, Vec<Complex64>, f64)>> {
    let spec = core::dirac::LatticeSpec::new(nt, nz, spacing).map_err(value_err)?;
    let config = core::IntegratorConfig::new(parse_scheme(scheme)?, step, steps, sample_every)
        .map_err(value_err)?;
    let trajectory = core::dirac::pure_state_evolve(&spec, &psi, config).map_err(value_err)?;
    Ok(trajectory
        .samples
        .into_iter()
        .map(|s| (s.s, s.psi, s.q))
        .collect())
}

#[pymodule]
fn nambu_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Metric>()?;
    m.add_class::<DensityState>()?;
    m.add_class::<Observable>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(casimir, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(fd_gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(lie_nambu, m)?)?;
    m.add_function(wrap_pyfunction!(lie_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(kron_metric, m)?)?;
    m.add_function(wrap_pyfunction!(product_state, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_state, m)?)?;
    m.add_function(wrap_pyfunction!(dirac_system, m)?)?;
    m.add_function(wrap_pyfunction!(dirac_pure_evolve, m)?)?;
    Ok(())
}
