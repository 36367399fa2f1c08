//! Python bindings for the spin-pair nutation toolkit.
//!
//! Exposes the forward model (exact pair transients, closed-form ensemble
//! curve) and the inverse chain (FFT, component extraction, envelope decay,
//! drive-scaling inversions) with plain floats and lists at the boundary.
//! Frequencies and detunings are MHz, fields mT, times ns, matching the
//! file formats of the command-line tool.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spinpair_core::constants::mhz_to_rad_per_us;
use spinpair_core::fit::{detect_envelope_maxima, fit_exp_decay};
use spinpair_core::quantum::{self, rabi_transient_oracle, PulseSpec, SpinPairParams};
use spinpair_core::rabi::{self, CouplingRegime, LineShape, QuadratureSettings};
use spinpair_core::records::{self, TransientMeta, TransientRecord};
use spinpair_core::spectral::{self, FftSettings, Window};
use spinpair_core::synth;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A value with a one-sigma uncertainty.
#[pyclass(frozen, get_all, from_py_object, module = "spinpair")]
#[derive(Clone, Copy)]
struct Measurement {
    value: f64,
    sigma: f64,
}

#[pymethods]
impl Measurement {
    #[new]
    #[pyo3(signature = (value, sigma = 0.0))]
    fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    fn __repr__(&self) -> String {
        format!("Measurement(value={}, sigma={})", self.value, self.sigma)
    }
}

impl From<records::Measurement> for Measurement {
    fn from(m: records::Measurement) -> Self {
        Self {
            value: m.value,
            sigma: m.sigma,
        }
    }
}

impl From<Measurement> for records::Measurement {
    fn from(m: Measurement) -> Self {
        records::Measurement::new(m.value, m.sigma)
    }
}

/// One oscillation component extracted from a transient.
#[pyclass(frozen, get_all, skip_from_py_object, module = "spinpair")]
#[derive(Clone)]
struct Component {
    /// Oscillation frequency, MHz.
    freq: Measurement,
    /// Decay width 1/(2 pi T), MHz.
    width: Measurement,
    /// Peak height, spectrum units.
    amplitude: f64,
}

#[pymethods]
impl Component {
    fn __repr__(&self) -> String {
        format!(
            "Component(freq={:.4} MHz, width={:.4} MHz, amplitude={:.4})",
            self.freq.value, self.width.value, self.amplitude
        )
    }
}

/// A coupled spin-1/2 pair in a static field.
#[pyclass(frozen, module = "spinpair")]
struct SpinPair {
    inner: SpinPairParams,
}

#[pymethods]
impl SpinPair {
    /// Couplings are ordinary frequencies in MHz; the field is mT.
    #[new]
    #[pyo3(signature = (g_a, g_b, j_mhz = 0.0, dd_mhz = 0.0, b0_mt = 350.0))]
    fn new(g_a: f64, g_b: f64, j_mhz: f64, dd_mhz: f64, b0_mt: f64) -> PyResult<Self> {
        let inner = SpinPairParams::new(
            g_a,
            g_b,
            mhz_to_rad_per_us(j_mhz),
            mhz_to_rad_per_us(dd_mhz),
            b0_mt,
        )
        .map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Larmor separation of the two spins, MHz.
    fn larmor_separation_mhz(&self) -> f64 {
        self.inner.larmor_separation() / std::f64::consts::TAU
    }

    /// Exact density-matrix nutation transient Q(tau).
    ///
    /// Returns (tau_ns, q). The carrier defaults to spin a's resonance.
    #[pyo3(signature = (b1_mt, tau_ns, carrier_mhz = None))]
    fn oracle_transient(
        &self,
        b1_mt: f64,
        tau_ns: Vec<f64>,
        carrier_mhz: Option<f64>,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let omega = carrier_mhz.map_or_else(|| self.inner.larmor_a(), mhz_to_rad_per_us);
        let pulse = PulseSpec::new(b1_mt, omega, 0.0).map_err(value_err)?;
        let rec = rabi_transient_oracle(&self.inner, &pulse, &tau_ns).map_err(runtime_err)?;
        Ok((rec.tau_ns, rec.q))
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinPair(g_a={}, g_b={}, b0_mt={})",
            self.inner.g_a, self.inner.g_b, self.inner.b0_mt
        )
    }
}

/// On-resonance nutation rate of one selectively driven spin, rad/us.
#[pyfunction]
fn nutation_rate(g: f64, b1_mt: f64) -> f64 {
    quantum::nutation_rate(g, b1_mt)
}

/// Observed nutation frequency at a given detuning, MHz.
///
/// kappa is the drive-coupling factor (0.5 selective, 1.0 strongly
/// coupled); the detuning is MHz.
#[pyfunction]
fn rabi_frequency_mhz(kappa: f64, b1_mt: f64, g: f64, detuning_mhz: f64) -> f64 {
    rabi::rabi_frequency(kappa, b1_mt, g, mhz_to_rad_per_us(detuning_mhz)) / std::f64::consts::TAU
}

/// Closed-form ensemble-averaged observable at one pulse length, for a flat
/// detuning distribution.
#[pyfunction]
#[pyo3(signature = (tau_ns, b1_mt, g, kappa = 0.5))]
fn delta_analytic(tau_ns: f64, b1_mt: f64, g: f64, kappa: f64) -> PyResult<f64> {
    let line = LineShape::flat(1.0).map_err(value_err)?;
    let est = rabi::delta_analytic(tau_ns, b1_mt, g, kappa, &line, &QuadratureSettings::default())
        .map_err(runtime_err)?;
    Ok(est.value)
}

/// Drive-coupling factor for a named regime: "weak-selective",
/// "strong-unselective" or "strong-small-b1".
#[pyfunction]
fn regime_kappa(name: &str) -> PyResult<f64> {
    let regime = match name {
        "weak-selective" => CouplingRegime::WeakSelective,
        "strong-unselective" => CouplingRegime::StrongUnselective,
        "strong-small-b1" => CouplingRegime::StrongSmallB1,
        other => {
            return Err(value_err(format!(
                "unknown regime {other:?}, expected \"weak-selective\", \
                 \"strong-unselective\" or \"strong-small-b1\""
            )))
        }
    };
    Ok(regime.kappa())
}

fn record_from_lists(tau_ns: Vec<f64>, q: Vec<f64>) -> PyResult<TransientRecord> {
    let meta = TransientMeta {
        b1_label: "py".to_string(),
        b1_scale: None,
        seed: None,
        noise_sigma: 0.0,
        n_shots: 1,
        components: Vec::new(),
    };
    TransientRecord::new(tau_ns, q, meta).map_err(value_err)
}

/// Magnitude spectrum of a uniformly sampled transient.
///
/// Returns (freq_mhz, magnitude).
#[pyfunction]
#[pyo3(signature = (tau_ns, q, zero_pad_factor = 4))]
fn fft_magnitude(
    tau_ns: Vec<f64>,
    q: Vec<f64>,
    zero_pad_factor: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rec = record_from_lists(tau_ns, q)?;
    let settings = FftSettings {
        window: Window::Rectangular,
        zero_pad_factor,
    };
    let spec = spectral::fft_magnitude(&rec, &settings).map_err(value_err)?;
    Ok((spec.x, spec.y))
}

/// Fits the strongest oscillation components of a transient.
#[pyfunction]
#[pyo3(signature = (tau_ns, q, n_components = 2, f_min_mhz = 2.0, zero_pad_factor = 4))]
fn extract_components(
    tau_ns: Vec<f64>,
    q: Vec<f64>,
    n_components: usize,
    f_min_mhz: f64,
    zero_pad_factor: usize,
) -> PyResult<Vec<Component>> {
    let rec = record_from_lists(tau_ns, q)?;
    let settings = FftSettings {
        window: Window::Rectangular,
        zero_pad_factor,
    };
    let table = spectral::extract_components(&rec, &settings, f_min_mhz, n_components)
        .map_err(runtime_err)?;
    Ok(table
        .components
        .into_iter()
        .map(|c| Component {
            freq: c.freq_mhz.into(),
            width: c.width_mhz.into(),
            amplitude: c.amplitude,
        })
        .collect())
}

/// Fits an exponential envelope through the oscillation maxima.
///
/// Returns (decay_ns, amplitude, n_maxima).
#[pyfunction]
fn envelope_decay(tau_ns: Vec<f64>, q: Vec<f64>) -> PyResult<(Measurement, Measurement, usize)> {
    let rec = record_from_lists(tau_ns, q)?;
    let maxima = detect_envelope_maxima(&rec).map_err(runtime_err)?;
    let fit = fit_exp_decay(&maxima).map_err(runtime_err)?;
    Ok((
        Measurement {
            value: fit.decay_ns,
            sigma: fit.decay_sigma_ns,
        },
        Measurement {
            value: fit.amplitude,
            sigma: fit.amplitude_sigma,
        },
        maxima.len(),
    ))
}

/// Inverts the two-drive-level frequency pair into the shared detuning, MHz.
///
/// omega_small is measured at the base drive, omega_large at xi times the
/// base drive; both are MHz.
#[pyfunction]
fn larmor_detuning(
    omega_small: Measurement,
    omega_large: Measurement,
    xi: f64,
) -> PyResult<Measurement> {
    spectral::larmor_detuning(omega_small.into(), omega_large.into(), xi)
        .map(Measurement::from)
        .map_err(runtime_err)
}

/// Drive-coupling ratio kappa_H/kappa_L from the low- and high-frequency
/// component at two drive levels (each pair ordered base, scaled).
#[pyfunction]
fn kappa_ratio(
    low_base: Measurement,
    low_scaled: Measurement,
    high_base: Measurement,
    high_scaled: Measurement,
) -> PyResult<Measurement> {
    spectral::kappa_ratio(
        &[low_base.into(), low_scaled.into()],
        &[high_base.into(), high_scaled.into()],
    )
    .map(Measurement::from)
    .map_err(runtime_err)
}

/// Converts a Larmor detuning (MHz) into a static-field offset (mT).
#[pyfunction]
fn detuning_to_field(detuning: Measurement, g: f64) -> PyResult<Measurement> {
    spectral::detuning_to_field(detuning.into(), g)
        .map(Measurement::from)
        .map_err(value_err)
}

/// Effective axial g-factor at angle theta (radians) from the symmetry axis.
#[pyfunction]
fn axial_g(g_par: f64, g_perp: f64, theta_rad: f64) -> f64 {
    spinpair_core::aniso::axial_g(g_par, g_perp, theta_rad)
}

/// Signal-to-noise ratio of one averaged shot over n accumulated pairs.
#[pyfunction]
fn snr_per_pair(n_shots: u64) -> f64 {
    synth::snr_per_pair(n_shots)
}

#[pymodule]
fn spinpair(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Measurement>()?;
    m.add_class::<Component>()?;
    m.add_class::<SpinPair>()?;
    m.add_function(wrap_pyfunction!(nutation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(rabi_frequency_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(delta_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(regime_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(fft_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(extract_components, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_decay, m)?)?;
    m.add_function(wrap_pyfunction!(larmor_detuning, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(detuning_to_field, m)?)?;
    m.add_function(wrap_pyfunction!(axial_g, m)?)?;
    m.add_function(wrap_pyfunction!(snr_per_pair, m)?)?;
    m.add("GAMMA_PER_G", spinpair_core::constants::GAMMA_PER_G)?;
    m.add("WIDTH_CAL", spinpair_core::spectral::WIDTH_CAL)?;
    Ok(())
}
