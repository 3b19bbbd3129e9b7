//! Python bindings for the `penning` toolkit.
//!
//! Quantities are SI throughout; frequencies are angular (rad/s) unless a
//! name ends in `_hz`.

use std::collections::HashMap;

use penning::coherence::{self as coh, NoiseModel, SequenceFamily};
use penning::electronics::{self as el, LadderNetwork};
use penning::modes::{self, MotionalMode, TrapParams};
use penning::sideband::{self as sb, FockDistribution, HeatingSample};
use penning::units::{self, Quantity, Species, BEAM_WAVELENGTH};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: penning::Error) -> PyErr {
    use penning::Error as E;
    match e {
        E::Parse(_) | E::InvalidParameter(_) | E::UnknownElectrode(_) | E::InvalidGeometry(_) | E::Unstable { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = penning::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "Species", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySpecies(Species);

#[pymethods]
impl PySpecies {
    #[new]
    fn new(mass: f64, charge: f64) -> Self {
        Self(Species { mass, charge })
    }

    /// Look up a species by name, e.g. "be9" or "proton".
    #[staticmethod]
    fn by_name(name: &str) -> PyResult<Self> {
        Species::by_name(name).map(Self).map_err(err)
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    #[getter]
    fn charge(&self) -> f64 {
        self.0.charge
    }

    fn __repr__(&self) -> String {
        format!("Species(mass={:e}, charge={:e})", self.0.mass, self.0.charge)
    }
}

fn species_or_be(s: Option<PySpecies>) -> Species {
    s.map_or_else(Species::beryllium9, |s| s.0)
}

/// Eigenmode frequencies of a single ion.
#[pyclass(name = "ModeSet", frozen)]
struct PyModeSet(modes::ModeSet);

#[pymethods]
impl PyModeSet {
    #[new]
    #[pyo3(signature = (b_field, omega_z, species=None))]
    fn new(b_field: f64, omega_z: f64, species: Option<PySpecies>) -> PyResult<Self> {
        let p = TrapParams::new(b_field, species_or_be(species)).map_err(err)?;
        modes::ModeSet::new(&p, omega_z).map(Self).map_err(err)
    }

    #[getter]
    fn omega_c(&self) -> f64 {
        self.0.omega_c
    }

    #[getter]
    fn omega_plus(&self) -> f64 {
        self.0.omega_plus
    }

    #[getter]
    fn omega_minus(&self) -> f64 {
        self.0.omega_minus
    }

    #[getter]
    fn omega_z(&self) -> f64 {
        self.0.omega_z
    }

    #[getter]
    fn stability_limit(&self) -> f64 {
        modes::stability_limit(self.0.omega_c)
    }

    fn frequencies_hz(&self) -> HashMap<&'static str, f64> {
        HashMap::from([
            ("omega_c", units::to_hz(self.0.omega_c)),
            ("omega_plus", units::to_hz(self.0.omega_plus)),
            ("omega_minus", units::to_hz(self.0.omega_minus)),
            ("omega_z", units::to_hz(self.0.omega_z)),
        ])
    }

    /// Lamb-Dicke parameter of `mode` ("plus", "minus" or "axial") for a
    /// wavevector difference `delta_k`.
    #[pyo3(signature = (delta_k, mode, species=None))]
    fn lamb_dicke(&self, delta_k: f64, mode: &str, species: Option<PySpecies>) -> PyResult<f64> {
        let m: MotionalMode = parse(mode)?;
        sb::lamb_dicke(delta_k, species_or_be(species).mass, &self.0, m).map(|l| l.eta).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModeSet(omega_c=2π×{:.4} MHz, omega_plus=2π×{:.4} MHz, omega_minus=2π×{:.4} MHz, omega_z=2π×{:.4} MHz)",
            units::to_hz(self.0.omega_c) * 1e-6,
            units::to_hz(self.0.omega_plus) * 1e-6,
            units::to_hz(self.0.omega_minus) * 1e-6,
            units::to_hz(self.0.omega_z) * 1e-6
        )
    }
}

#[pyclass(name = "FockDistribution", frozen)]
struct PyFock(FockDistribution);

#[pymethods]
impl PyFock {
    #[staticmethod]
    fn thermal(n_bar: f64) -> PyResult<Self> {
        FockDistribution::thermal(n_bar).map(Self).map_err(err)
    }

    #[staticmethod]
    fn fock(n: usize) -> Self {
        Self(FockDistribution::fock(n))
    }

    #[staticmethod]
    fn from_probs(probs: Vec<f64>) -> PyResult<Self> {
        FockDistribution::from_probs(probs).map(Self).map_err(err)
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    /// Spin-flip probability after a pulse on the `delta_n` sideband.
    fn excitation_probability(&self, delta_n: i64, duration: f64, eta: f64, rabi: f64) -> f64 {
        sb::excitation_probability(&self.0, delta_n, duration, eta, rabi)
    }

    /// Distribution after heating at `rate` quanta/s for `duration`.
    fn heat(&self, rate: f64, duration: f64) -> Self {
        Self(sb::heat(&self.0, rate, duration))
    }
}

#[pyclass(name = "NoiseModel", frozen)]
struct PyNoise(NoiseModel);

#[pymethods]
impl PyNoise {
    #[staticmethod]
    fn quasi_static(sigma: f64) -> Self {
        Self(NoiseModel::QuasiStatic { sigma })
    }

    #[staticmethod]
    fn ornstein_uhlenbeck(sigma: f64, correlation_time: f64) -> Self {
        Self(NoiseModel::OrnsteinUhlenbeck { sigma, correlation_time })
    }

    #[staticmethod]
    fn white(density: f64) -> Self {
        Self(NoiseModel::White { density })
    }

    #[staticmethod]
    fn power_law(amplitude: f64, alpha: f64, low_cutoff: f64, high_cutoff: f64) -> Self {
        Self(NoiseModel::PowerLaw { amplitude, alpha, low_cutoff, high_cutoff })
    }

    fn spectral_density(&self, omega: f64) -> f64 {
        self.0.spectral_density(omega)
    }

    /// Filter-function coherence of `sequence` ("ramsey", "echo",
    /// "uhrig-N") at each total time.
    fn coherence(&self, sequence: &str, times: Vec<f64>) -> PyResult<Vec<f64>> {
        let fam: SequenceFamily = parse(sequence)?;
        coh::coherence_decay(&self.0, fam, &times).map(|c| c.contrast).map_err(err)
    }

    /// 1/e coherence time, or None if the contrast stays above 1/e up to
    /// `t_max`.
    fn coherence_time(&self, sequence: &str, t_max: f64) -> PyResult<Option<f64>> {
        coh::coherence_time(&self.0, parse(sequence)?, t_max).map_err(err)
    }

    /// Monte-Carlo coherence: (contrast, standard error).
    #[pyo3(signature = (sequence, times, paths=10_000, seed=1))]
    fn monte_carlo(&self, sequence: &str, times: Vec<f64>, paths: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let opts = coh::MonteCarloOptions { paths, seed };
        coh::monte_carlo_decay(&self.0, parse(sequence)?, &times, &opts).map(|c| (c.contrast, c.stderr)).map_err(err)
    }
}

#[pyclass(name = "LadderNetwork", frozen)]
struct PyLadder(LadderNetwork);

#[pymethods]
impl PyLadder {
    #[staticmethod]
    fn detachment_ladder() -> Self {
        Self(LadderNetwork::detachment_ladder())
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        LadderNetwork::from_toml_str(text).map(Self).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml_string()
    }

    fn with_switches(&self, closed: bool) -> Self {
        Self(self.0.with_switches(closed))
    }

    /// Gain in dB at `f_hz`.
    fn gain_db(&self, f_hz: f64) -> PyResult<f64> {
        el::transfer_function(&self.0, f_hz).map(|t| t.db()).map_err(err)
    }

    fn isolation_db(&self, f_hz: f64) -> PyResult<f64> {
        el::transfer_function(&self.0, f_hz).map(|t| t.isolation_db()).map_err(err)
    }

    /// (frequencies, isolation) over dc and the motional band.
    #[pyo3(signature = (points=200))]
    fn isolation_report(&self, points: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let r = el::isolation_report(&self.0, &el::motional_band(points)).map_err(err)?;
        let iso = r.isolation_db();
        Ok((r.frequencies, iso))
    }

    /// Fit switch leakage and bridge capacitance so the isolation hits
    /// `dc_target_db` at dc and `hf_target_db` at `hf_hz`. Returns
    /// (switch_leakage, bridge_capacitance, fitted network).
    #[pyo3(signature = (dc_target_db=83.0, hf_target_db=77.0, hf_hz=5e6, shunt_leakage=1e10))]
    fn fit_parasitics(
        &self,
        dc_target_db: f64,
        hf_target_db: f64,
        hf_hz: f64,
        shunt_leakage: f64,
    ) -> PyResult<(f64, f64, PyLadder)> {
        let f = el::fit_parasitics(&self.0, dc_target_db, hf_target_db, hf_hz, shunt_leakage).map_err(err)?;
        Ok((f.switch_leakage, f.bridge_capacitance, PyLadder(f.network)))
    }
}

/// Parse a quantity with units, e.g. "2.5 MHz"; returns (SI value,
/// dimension name). Hz is converted to rad/s.
#[pyfunction]
fn parse_quantity(text: &str) -> PyResult<(f64, String)> {
    let q: Quantity = parse(text)?;
    let mut name = String::new();
    for (i, c) in format!("{:?}", q.dimension).chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            name.push('_');
        }
        name.push(c.to_ascii_lowercase());
    }
    Ok((q.value, name))
}

#[pyfunction]
#[pyo3(signature = (b_field, species=None))]
fn cyclotron_frequency(b_field: f64, species: Option<PySpecies>) -> PyResult<f64> {
    let p = TrapParams::new(b_field, species_or_be(species)).map_err(err)?;
    Ok(modes::cyclotron_frequency(&p))
}

/// |Δk| of two beams crossing at `angle`.
#[pyfunction]
#[pyo3(signature = (angle, wavelength=BEAM_WAVELENGTH))]
fn raman_wavevector_difference(angle: f64, wavelength: f64) -> f64 {
    sb::raman_wavevector_difference(angle, wavelength)
}

#[pyfunction]
fn rabi_coupling(n: usize, order: i64, eta: f64, rabi: f64) -> f64 {
    sb::rabi_coupling(n, order, eta, rabi)
}

#[pyfunction]
fn pi_time(n: usize, order: i64, eta: f64, rabi: f64) -> f64 {
    sb::pi_time(n, order, eta, rabi)
}

#[pyfunction]
fn sideband_ratio_thermometry(p_lowering: f64, p_raising: f64) -> PyResult<f64> {
    sb::sideband_ratio_thermometry(p_lowering, p_raising).map_err(err)
}

/// Straight-line heating fit; returns (slope, slope_err, intercept,
/// intercept_err).
#[pyfunction]
#[pyo3(signature = (t_wait, n_bar, sigma=None))]
fn heating_fit(t_wait: Vec<f64>, n_bar: Vec<f64>, sigma: Option<Vec<f64>>) -> PyResult<(f64, f64, f64, f64)> {
    if t_wait.len() != n_bar.len() || sigma.as_ref().is_some_and(|s| s.len() != t_wait.len()) {
        return Err(PyValueError::new_err("t_wait, n_bar and sigma must have equal length"));
    }
    let samples: Vec<HeatingSample> = t_wait
        .iter()
        .zip(&n_bar)
        .enumerate()
        .map(|(k, (&t, &n))| HeatingSample { t_wait: t, n_bar: n, sigma: sigma.as_ref().map_or(0.0, |s| s[k]) })
        .collect();
    let f = sb::heating_fit(&samples).map_err(err)?;
    Ok((f.slope, f.slope_err, f.intercept, f.intercept_err))
}

/// Electric-field noise spectral density (V²m⁻²Hz⁻¹) from a heating rate.
#[pyfunction]
#[pyo3(signature = (heating_rate, omega, species=None))]
fn electric_field_noise(heating_rate: f64, omega: f64, species: Option<PySpecies>) -> f64 {
    let s = species_or_be(species);
    sb::electric_field_noise(heating_rate, omega, s.mass, s.charge)
}

#[pymodule]
fn penning_trap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", penning::VERSION)?;
    m.add_class::<PySpecies>()?;
    m.add_class::<PyModeSet>()?;
    m.add_class::<PyFock>()?;
    m.add_class::<PyNoise>()?;
    m.add_class::<PyLadder>()?;
    m.add_function(wrap_pyfunction!(parse_quantity, m)?)?;
    m.add_function(wrap_pyfunction!(cyclotron_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(raman_wavevector_difference, m)?)?;
    m.add_function(wrap_pyfunction!(rabi_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(pi_time, m)?)?;
    m.add_function(wrap_pyfunction!(sideband_ratio_thermometry, m)?)?;
    m.add_function(wrap_pyfunction!(heating_fit, m)?)?;
    m.add_function(wrap_pyfunction!(electric_field_noise, m)?)?;
    Ok(())
}
