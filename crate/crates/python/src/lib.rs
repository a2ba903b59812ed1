//! Python bindings: presets, simulation, synthesis, certification and the
//! config-driven runner. Reports come back as JSON strings.

use pyo3::exceptions::{PyFloatingPointError, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use statedelay::cli;
use statedelay::config::{self, Command, Overrides};
use statedelay::diagnostics::{audit_certificates, CertifiedConstants};
use statedelay::kernels::StateSampler;
use statedelay::presets;
use statedelay::synthesis::{self, certify_stationary_kernel, StationaryKernel};
use statedelay::{certify_kernel, CertifySettings, ChiFamily, Error, PhaseState, SpectralField};

fn py_err(e: Error) -> PyErr {
    if e.is_blowup() {
        return PyFloatingPointError::new_err(e.to_string());
    }
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::InvalidConfig(_)
        | Error::InvalidInput(_)
        | Error::Domain(_)
        | Error::InvalidState(_)
        | Error::DegenerateEquilibrium(_)
        | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Sine basis of `(0, L)` with Gauss-Legendre nodes.
#[pyclass(module = "statedelay_py", frozen)]
struct Basis {
    inner: statedelay::Basis,
}

#[pymethods]
impl Basis {
    #[new]
    #[pyo3(signature = (length, modes, quad_order=None))]
    fn new(length: f64, modes: usize, quad_order: Option<usize>) -> PyResult<Self> {
        let q = quad_order.unwrap_or(4 * modes);
        Ok(Self {
            inner: statedelay::Basis::new(length, modes, q).map_err(py_err)?,
        })
    }

    #[getter]
    fn modes(&self) -> usize {
        self.inner.modes()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.lambda().to_vec()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    /// Coefficients of the function sampled at `nodes`.
    fn project(&self, samples: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.project(&samples).map_err(py_err)?.into_coeffs())
    }

    fn evaluate(&self, coeffs: Vec<f64>, points: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner
            .evaluate(&SpectralField::new(coeffs), &points)
            .map_err(py_err)
    }

    /// `‖A^s u‖`
    fn fractional_norm(&self, coeffs: Vec<f64>, s: f64) -> f64 {
        self.inner.fractional_norm(&SpectralField::new(coeffs), s)
    }

    fn __repr__(&self) -> String {
        format!(
            "Basis(length={}, modes={})",
            self.inner.length(),
            self.inner.modes()
        )
    }
}

/// Uniformly sampled solution with norms and cumulative dissipation.
#[pyclass(module = "statedelay_py", frozen)]
struct Trajectory {
    inner: statedelay::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn norm_l2(&self) -> Vec<f64> {
        self.inner.norm_l2.clone()
    }

    #[getter]
    fn norm_h1(&self) -> Vec<f64> {
        self.inner.norm_h1.clone()
    }

    #[getter]
    fn dissipation(&self) -> Vec<f64> {
        self.inner.dissipation.clone()
    }

    /// One list of mode coefficients per time.
    #[getter]
    fn coeffs(&self) -> Vec<Vec<f64>> {
        self.inner.fields.iter().map(|f| f.coeffs().to_vec()).collect()
    }

    fn energy_functional(&self) -> Vec<f64> {
        self.inner.energy_functional()
    }

    fn to_csv(&self) -> String {
        cli::trajectory_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(module = "statedelay_py", frozen)]
struct Model {
    inner: statedelay::Model,
}

impl Model {
    fn constants(&self) -> PyResult<CertifiedConstants> {
        CertifiedConstants::from_model(&self.inner).map_err(py_err)
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (name, modes=None, dt=None))]
    fn preset(name: &str, modes: Option<usize>, dt: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: presets::preset_model(name, modes, dt).map_err(py_err)?,
        })
    }

    /// Builds the model described by a config text.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        let cfg = config::parse_config(text).map_err(py_err)?;
        Ok(Self {
            inner: cli::build_model(&cfg).map_err(py_err)?,
        })
    }

    #[getter]
    fn modes(&self) -> usize {
        self.inner.config().modes
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.config().dt
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.config().r
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.config().d
    }

    #[getter]
    fn kernel_family(&self) -> &'static str {
        self.inner.kernel().family()
    }

    fn basis(&self) -> Basis {
        Basis {
            inner: self.inner.basis().clone(),
        }
    }

    /// Certified constants as JSON, including `k1` and the absorbing level.
    fn constants_json(&self) -> PyResult<String> {
        let c = self.constants()?;
        let mut v = serde_json::to_value(&c).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        v["k1"] = c.k1().into();
        v["absorbing_level"] = c.absorbing_level().into();
        json(&v)
    }

    /// Runs from `u(0) = u0` with history `u0` (or zero when `history="zero"`).
    #[pyo3(signature = (u0, t_end, history="constant"))]
    fn simulate(&self, py: Python<'_>, u0: Vec<f64>, t_end: f64, history: &str) -> PyResult<Trajectory> {
        let u0 = SpectralField::new(u0).resized(self.modes());
        let past = match history {
            "constant" => u0.clone(),
            "zero" => SpectralField::zeros(self.modes()),
            other => return Err(PyValueError::new_err(format!("unknown history {other:?}"))),
        };
        let model = &self.inner;
        let traj = py
            .detach(|| statedelay::simulate(model, &u0, &|_| past.clone(), t_end))
            .map_err(py_err)?;
        Ok(Trajectory { inner: traj })
    }

    /// Runs from a seeded random phase state with H-norm at most `radius`.
    fn simulate_random(&self, py: Python<'_>, radius: f64, seed: u64, t_end: f64) -> PyResult<Trajectory> {
        let model = &self.inner;
        let state = StateSampler::new(model.config().modes, model.theta_quadrature())
            .sample_states(1, radius, seed)
            .remove(0);
        let traj = py
            .detach(|| statedelay::solver::simulate_from_state(model, &state, t_end))
            .map_err(py_err)?;
        Ok(Trajectory { inner: traj })
    }

    /// Delay term at the constant-history state `(u, u)`.
    fn eval_f(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        let u = SpectralField::new(u).resized(self.modes());
        let state = PhaseState::stationary(&u, self.inner.theta_quadrature());
        Ok(statedelay::eval_f(&state, &self.inner)
            .map_err(py_err)?
            .into_coeffs())
    }

    /// Audit of the a-priori estimates along `traj`, as JSON.
    #[pyo3(signature = (traj, tol=None))]
    fn audit_json(&self, traj: &Trajectory, tol: Option<f64>) -> PyResult<String> {
        let tol = tol.unwrap_or_else(|| cli::audit_tolerance(self.dt(), self.r()));
        json(&audit_certificates(&traj.inner, &self.constants()?, tol))
    }

    /// Kernel certificate as JSON.
    #[pyo3(signature = (seed, n_states=200, n_pairs=300, radius=10.0))]
    fn certify_json(
        &self,
        py: Python<'_>,
        seed: u64,
        n_states: usize,
        n_pairs: usize,
        radius: f64,
    ) -> PyResult<String> {
        let settings = CertifySettings {
            n_states,
            n_pairs,
            radius,
            seed,
            ..CertifySettings::default()
        };
        let model = &self.inner;
        let rep = py
            .detach(|| {
                certify_kernel(
                    model.kernel().as_ref(),
                    model.basis(),
                    model.theta_quadrature(),
                    &settings,
                )
            })
            .map_err(py_err)?;
        json(&rep)
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Model(kernel={}, modes={}, d={}, r={}, dt={})",
            self.inner.kernel().family(),
            c.modes,
            c.d,
            c.r,
            c.dt
        )
    }
}

/// Blended kernel with prescribed stationary solutions.
#[pyclass(module = "statedelay_py", frozen)]
struct Synthesized {
    model: statedelay::Model,
    kernel: StationaryKernel,
}

#[pymethods]
impl Synthesized {
    fn model(&self) -> Model {
        Model {
            inner: self.model.clone(),
        }
    }

    #[getter]
    fn targets(&self) -> Vec<Vec<f64>> {
        self.kernel
            .targets()
            .iter()
            .map(|t| t.u_st.coeffs().to_vec())
            .collect()
    }

    /// Serialized kernel, loadable through a `synthesized` kernel config.
    fn artifact_json(&self) -> PyResult<String> {
        json(&synthesis::KernelArtifact::from_kernel(
            &self.kernel,
            self.model.config(),
        ))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        synthesis::KernelArtifact::from_kernel(&self.kernel, self.model.config())
            .save(path)
            .map_err(py_err)
    }

    /// Residual and drift check for target `index`, as JSON.
    #[pyo3(signature = (index, t_end, tol=1e-4))]
    fn verify_json(&self, py: Python<'_>, index: usize, t_end: f64, tol: f64) -> PyResult<String> {
        let target = self
            .kernel
            .targets()
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("no target {index}")))?
            .u_st
            .clone();
        let model = &self.model;
        let rep = py
            .detach(|| synthesis::verify_stationary(model, &target, t_end, tol))
            .map_err(py_err)?;
        json(&rep)
    }

    fn certify_json(&self, py: Python<'_>, seed: u64) -> PyResult<String> {
        let settings = CertifySettings {
            seed,
            ..CertifySettings::default()
        };
        let (k, model) = (&self.kernel, &self.model);
        let rep = py
            .detach(|| certify_stationary_kernel(k, model.basis(), model.theta_quadrature(), &settings))
            .map_err(py_err)?;
        json(&rep)
    }
}

/// Builds a kernel for which every target (mode coefficients) is stationary.
#[pyfunction]
#[pyo3(signature = (preset, targets, rho=0.5, chi=1.0, dt=None))]
fn synthesize(
    py: Python<'_>,
    preset: &str,
    targets: Vec<Vec<f64>>,
    rho: f64,
    chi: f64,
    dt: Option<f64>,
) -> PyResult<Synthesized> {
    let (mut cfg, _) = presets::preset(preset).map_err(py_err)?;
    if let Some(dt) = dt {
        cfg = cfg.with_dt(dt);
    }
    let fields: Vec<SpectralField> = targets
        .into_iter()
        .map(|c| SpectralField::new(c).resized(cfg.modes))
        .collect();
    let (model, kernel) = py
        .detach(|| synthesis::synthesize_model(&cfg, &fields, &ChiFamily::Constant { value: chi }, rho))
        .map_err(py_err)?;
    Ok(Synthesized { model, kernel })
}

/// Runs a config text as the command-line tool would; returns `(exit_code, summary)`.
#[pyfunction]
#[pyo3(signature = (text, out=None, seed=None))]
fn run_config(py: Python<'_>, text: &str, out: Option<String>, seed: Option<u64>) -> PyResult<(i32, String)> {
    let cfg = config::parse_config_with(
        text,
        &Overrides {
            out,
            seed,
            ..Overrides::default()
        },
    )
    .map_err(py_err)?;
    match py.detach(|| cli::run(&cfg)) {
        Ok(o) => Ok((o.exit_code, o.summary)),
        Err(e) => Ok((cli::exit_code_for(&e), e.to_string())),
    }
}

#[pyfunction]
#[pyo3(signature = (preset, command="simulate", seed=0))]
fn template(preset: &str, command: &str, seed: u64) -> PyResult<String> {
    let cmd = Command::parse(command)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command {command:?}")))?;
    config::preset_template(preset, cmd, seed).map_err(py_err)
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    presets::PRESET_NAMES.to_vec()
}

#[pymodule]
fn statedelay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Basis>()?;
    m.add_class::<Model>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Synthesized>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(template, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add("EXIT_OK", cli::EXIT_OK)?;
    m.add("EXIT_INVALID", cli::EXIT_INVALID)?;
    m.add("EXIT_BLOWUP", cli::EXIT_BLOWUP)?;
    m.add("EXIT_AUDIT", cli::EXIT_AUDIT)?;
    Ok(())
}
