//! Python bindings for the `rotcav` core crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rotcav::config::{ConfigError, RunConfig};
use rotcav::dynamics::{CavityMode, Dynamics, IntegratorConfig, SystemState};
use rotcav::params::{CavityConfig, ModeVolume, ParticleKind, ParticleSpec, RateConvention};
use rotcav::rotor::RotorState;
use rotcav::{Complex64, Vec3};

fn model_error(e: rotcav::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn config_error(e: ConfigError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Parsed run configuration.
#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        RunConfig::from_path(&path).map(|inner| Self { inner }).map_err(config_error)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        RunConfig::parse(text).map(|inner| Self { inner }).map_err(config_error)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn defaulted(&self) -> Vec<String> {
        self.inner.defaulted.clone()
    }

    fn system(&self) -> PyResult<PySystem> {
        self.inner.system().map(|inner| PySystem { inner }).map_err(model_error)
    }

    fn sphere_system(&self) -> PyResult<PySystem> {
        self.inner.sphere_system().map(|inner| PySystem { inner }).map_err(model_error)
    }

    /// Resolved configuration as a dict.
    fn resolved<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner)
    }

    /// Capture probabilities over the `[ensemble]` grid. Returns one dict
    /// per velocity.
    #[pyo3(signature = (sphere = false, threads = None))]
    fn capture_curve<'py>(&self, py: Python<'py>, sphere: bool, threads: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let system = if sphere { self.inner.sphere_system() } else { self.inner.system() }.map_err(model_error)?;
        let ensemble = self.inner.ensemble_config();
        let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        let result = py
            .detach(|| rotcav::ensemble::with_threads(threads, || rotcav::ensemble::capture_curve(&system, &ensemble)))
            .map_err(model_error)?
            .map_err(model_error)?;
        let points: Vec<_> = result
            .points
            .iter()
            .map(|p| {
                serde_json::json!({
                    "vx": p.vx,
                    "p_capture": p.capture.estimate,
                    "ci_low": p.capture.low,
                    "ci_high": p.capture.high,
                    "captured": p.captured,
                    "transmitted": p.transmitted,
                    "undecided": p.undecided,
                    "failures": p.failures,
                    "total": p.total,
                })
            })
            .collect();
        to_python(py, &points)
    }
}

/// A particle in a cavity with all derived constants.
#[pyclass(name = "System", frozen)]
struct PySystem {
    inner: rotcav::params::System,
}

#[pymethods]
impl PySystem {
    /// Rates are quoted values interpreted with `rate_convention`.
    #[new]
    #[pyo3(signature = (kind, length, radius, wavelength, linewidth, detuning, pump_power, waist, coupling_ratio,
                        density = 2329.0, permittivity = 12.1, rate_convention = "angular"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        length: f64,
        radius: f64,
        wavelength: f64,
        linewidth: f64,
        detuning: f64,
        pump_power: f64,
        waist: f64,
        coupling_ratio: f64,
        density: f64,
        permittivity: f64,
        rate_convention: &str,
    ) -> PyResult<Self> {
        let kind: ParticleKind = kind.parse().map_err(PyValueError::new_err)?;
        let rate_convention: RateConvention = rate_convention.parse().map_err(PyValueError::new_err)?;
        let particle = ParticleSpec::new(kind, length, radius, density, permittivity).map_err(model_error)?;
        let cavity = CavityConfig {
            wavelength,
            linewidth,
            detuning,
            pump_power,
            waist,
            mode_volume: ModeVolume::CouplingRatio(coupling_ratio),
            rate_convention,
        };
        rotcav::params::System::new(particle, cavity).map(|inner| Self { inner }).map_err(model_error)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn inertia(&self) -> f64 {
        self.inner.inertia
    }

    #[getter]
    fn u0(&self) -> f64 {
        self.inner.coupling.u0
    }

    #[getter]
    fn gamma0(&self) -> f64 {
        self.inner.coupling.gamma0
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.coupling.kappa
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.coupling.delta
    }

    #[getter]
    fn mode_volume(&self) -> f64 {
        self.inner.coupling.mode_volume
    }

    fn equivalent_sphere(&self) -> PyResult<PySystem> {
        let sphere = self.inner.particle.equivalent_sphere().map_err(model_error)?;
        self.inner.with_particle(sphere).map(|inner| PySystem { inner }).map_err(model_error)
    }

    /// `v = V / ħU0|b|²`.
    fn dimensionless_potential(&self, r: [f64; 3], m: [f64; 3]) -> f64 {
        rotcav::optics::dimensionless_potential(&self.inner, &vec3(r), &vec3(m).normalize())
    }

    /// Potential energy in joules for `photons = |b|²`.
    fn potential(&self, r: [f64; 3], m: [f64; 3], photons: f64) -> f64 {
        rotcav::optics::potential(&self.inner, &vec3(r), &vec3(m).normalize(), photons)
    }

    /// Phase-space contraction rate; negative means cooling.
    fn gamma_rate(&self, r: [f64; 3], m: [f64; 3]) -> f64 {
        rotcav::cooling::gamma_rate(&self.inner, &vec3(r), &vec3(m).normalize())
    }

    #[pyo3(signature = (degree = 30))]
    fn cooling_report<'py>(&self, py: Python<'py>, degree: usize) -> PyResult<Bound<'py, PyAny>> {
        let report = rotcav::cooling::cooling_report(&self.inner, degree).map_err(model_error)?;
        to_python(py, &report)
    }

    fn validity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner.validity())
    }

    /// Integrates one trajectory from rest values in SI units. `b` defaults
    /// to the empty-cavity amplitude. Returns a dict of column lists.
    #[pyo3(signature = (r, p, m, l, duration, b = None, cavity_mode = "dynamic", rel_tol = 1e-8,
                        scattering_loss = true, radiation_pressure = true, output_interval = 1e-7))]
    #[allow(clippy::too_many_arguments)]
    fn trajectory<'py>(
        &self,
        py: Python<'py>,
        r: [f64; 3],
        p: [f64; 3],
        m: [f64; 3],
        l: [f64; 3],
        duration: f64,
        b: Option<Complex64>,
        cavity_mode: &str,
        rel_tol: f64,
        scattering_loss: bool,
        radiation_pressure: bool,
        output_interval: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cavity_mode: CavityMode = cavity_mode.parse().map_err(PyValueError::new_err)?;
        let config = IntegratorConfig {
            rel_tol,
            abs_tol: rel_tol,
            cavity_mode,
            scattering_loss,
            radiation_pressure,
            output_interval,
            ..IntegratorConfig::default()
        };
        let m = vec3(m).normalize();
        let l = vec3(l);
        let rotor = RotorState::new(m, l - m * m.dot(&l));
        let start = SystemState::new(vec3(r), vec3(p), rotor, b.unwrap_or_else(|| self.inner.empty_cavity_amplitude()));
        let system = &self.inner;
        let trajectory = py
            .detach(|| Dynamics::new(system, config).and_then(|d| d.integrate(&start, duration)))
            .map_err(model_error)?;
        let out = PyDict::new(py);
        let column = |f: &dyn Fn(&rotcav::dynamics::Sample) -> f64| trajectory.samples.iter().map(f).collect::<Vec<f64>>();
        out.set_item("t", column(&|s| s.state.t))?;
        out.set_item("r", trajectory.samples.iter().map(|s| array(&s.state.r)).collect::<Vec<_>>())?;
        out.set_item("p", trajectory.samples.iter().map(|s| array(&s.state.p)).collect::<Vec<_>>())?;
        out.set_item("m", trajectory.samples.iter().map(|s| array(&s.state.rotor.m)).collect::<Vec<_>>())?;
        out.set_item("L", trajectory.samples.iter().map(|s| array(&s.state.rotor.l)).collect::<Vec<_>>())?;
        out.set_item("b", trajectory.samples.iter().map(|s| s.state.b).collect::<Vec<Complex64>>())?;
        out.set_item("energy", column(&|s| s.observables.energy))?;
        out.set_item("gamma_sc", column(&|s| s.observables.gamma_sc))?;
        Ok(out)
    }
}

/// Wilson score interval `(estimate, low, high)` at 95%.
#[pyfunction]
fn wilson_interval(successes: usize, total: usize) -> PyResult<(f64, f64, f64)> {
    if total == 0 || successes > total {
        return Err(PyValueError::new_err("need 0 <= successes <= total and total > 0"));
    }
    let p = rotcav::ensemble::wilson_interval(successes, total, rotcav::ensemble::Z95);
    Ok((p.estimate, p.low, p.high))
}

#[pymodule]
fn rotcav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
