//! Frequency-domain analysis of oscillatory transients.
//!
//! The pipeline is: mean-subtract, window, zero-pad, FFT, one-sided
//! magnitude. Oscillation components are then located by Lorentzian fits
//! to the magnitude spectrum, and simple frequency algebra converts pairs
//! of fitted frequencies into detunings and drive-coupling ratios with
//! propagated uncertainties.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_lorentzians, FitError, FitOptions, PeakEstimate};
use crate::records::{RecordError, SpectrumAxis, SpectrumRecord, TransientRecord};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("bad settings: {0}")]
    BadSettings(String),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error(
        "frequency pair is inconsistent with the model: discriminant {value} \
         is {sigma_deficit} sigma below zero"
    )]
    NegativeDiscriminant { value: f64, sigma_deficit: f64 },
    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),
}

/// Apodization window applied before the FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// No apodization; narrowest main lobe, best for well-separated peaks.
    #[default]
    Rectangular,
    /// Raised cosine; trades resolution for sidelobe suppression.
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let phase = std::f64::consts::TAU * i as f64 / (n - 1).max(1) as f64;
                    0.5 * (1.0 - phase.cos())
                })
                .collect(),
        }
    }
}

/// Settings for [`fft_magnitude`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FftSettings {
    pub window: Window,
    /// Transform length as a multiple of the record length; padding
    /// interpolates the spectrum so peak fits are not bin-quantized.
    pub zero_pad_factor: usize,
}

impl Default for FftSettings {
    fn default() -> Self {
        Self {
            window: Window::Rectangular,
            zero_pad_factor: 4,
        }
    }
}

/// One-sided magnitude spectrum of a uniformly sampled transient.
///
/// The record mean is subtracted first (the oscillation model rides on a
/// constant pedestal), the window applied, and the signal zero-padded.
/// The frequency axis is in MHz for a time grid in ns; magnitudes are
/// scaled by `2 / sum(window)` so an undamped unit-amplitude cosine
/// peaks near 1.
pub fn fft_magnitude(
    record: &TransientRecord,
    settings: &FftSettings,
) -> Result<SpectrumRecord, SpectralError> {
    if settings.zero_pad_factor == 0 {
        return Err(SpectralError::BadSettings(
            "zero_pad_factor must be at least 1".into(),
        ));
    }
    let n = record.q.len();
    if n < 8 {
        return Err(SpectralError::TooShort { needed: 8, got: n });
    }
    let dt_us = record
        .uniform_step_ns()
        .ok_or(RecordError::NonUniformGrid)?
        * 1e-3;

    let mean = record.q.iter().sum::<f64>() / n as f64;
    let window = settings.window.coefficients(n);
    let gain: f64 = window.iter().sum();

    let n_pad = n * settings.zero_pad_factor;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_pad];
    for i in 0..n {
        buf[i] = Complex64::new((record.q[i] - mean) * window[i], 0.0);
    }
    FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);

    let n_half = n_pad / 2 + 1;
    let scale = 2.0 / gain;
    let x = (0..n_half)
        .map(|k| k as f64 / (n_pad as f64 * dt_us))
        .collect();
    let y = buf[..n_half].iter().map(|c| c.norm() * scale).collect();
    Ok(SpectrumRecord::new(x, y, SpectrumAxis::FrequencyMhz)?)
}

/// Location and height of the tallest spectrum point at or above
/// `x_min`, refined to sub-bin precision with a three-point parabola.
/// Returns `None` when no point lies at or above `x_min`.
pub fn dominant_peak(spectrum: &SpectrumRecord, x_min: f64) -> Option<(f64, f64)> {
    let start = spectrum.x.partition_point(|&x| x < x_min);
    let slice = &spectrum.y[start..];
    if slice.is_empty() {
        return None;
    }
    let rel = slice
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)?;
    let i = start + rel;
    if i == 0 || i + 1 == spectrum.y.len() {
        return Some((spectrum.x[i], spectrum.y[i]));
    }
    let (y0, y1, y2) = (spectrum.y[i - 1], spectrum.y[i], spectrum.y[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() <= f64::EPSILON * (y0.abs() + y1.abs() + y2.abs()) {
        return Some((spectrum.x[i], y1));
    }
    let shift = (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5);
    let dx = if shift >= 0.0 {
        spectrum.x[i + 1] - spectrum.x[i]
    } else {
        spectrum.x[i] - spectrum.x[i - 1]
    };
    Some((spectrum.x[i] + shift * dx, y1 - 0.25 * (y0 - y2) * shift))
}

/// Converts the fitted half-width of a magnitude-spectrum Lorentzian to
/// the decay rate `1 / (2 pi T)` of the underlying damped cosine.
///
/// The magnitude of a damped cosine's spectrum is `A / sqrt(d^2 + g^2)`
/// with `g = 1 / (2 pi T)`, so its half-height half-width is `sqrt(3) g`
/// before windowing. The constant is frozen from a calibration run on
/// the standard acquisition window (0..800 ns, 2 ns step, `T = 500 ns`,
/// default pipeline), which folds the finite-record broadening of that
/// window into the conversion; see the regeneration test. Records with
/// a very different span-to-decay ratio will convert less accurately.
pub const WIDTH_CAL: f64 = 0.344_95;

pub use crate::records::Measurement;

/// One oscillation component located in a magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimate {
    /// Oscillation frequency in MHz.
    pub freq_mhz: Measurement,
    /// Decay width `1 / (2 pi T)` in MHz, calibrated via [`WIDTH_CAL`].
    pub width_mhz: Measurement,
    /// Peak height in spectrum units.
    pub amplitude: f64,
}

/// Components extracted from one transient, sorted by ascending frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentTable {
    pub b1_label: String,
    pub components: Vec<ComponentEstimate>,
}

impl ComponentTable {
    /// The (lowest, highest) frequency components; errors when fewer
    /// than two were extracted.
    pub fn low_high(&self) -> Result<(&ComponentEstimate, &ComponentEstimate), SpectralError> {
        if self.components.len() < 2 {
            return Err(SpectralError::InconsistentMeasurement(format!(
                "need two components, extracted {}",
                self.components.len()
            )));
        }
        Ok((
            &self.components[0],
            &self.components[self.components.len() - 1],
        ))
    }
}

/// Extracts `n_components` oscillation components from a transient by
/// fitting Lorentzians to its magnitude spectrum above `f_min_mhz`.
///
/// The low-frequency guard excludes the residual DC skirt; one or two
/// MHz is appropriate for the default 2 ns / 800 ns grid. Widths are
/// reported in decay-rate convention (see [`WIDTH_CAL`]).
pub fn extract_components(
    record: &TransientRecord,
    settings: &FftSettings,
    f_min_mhz: f64,
    n_components: usize,
) -> Result<ComponentTable, SpectralError> {
    let spectrum = fft_magnitude(record, settings)?;
    extract_from_spectrum(&spectrum, &record.meta.b1_label, f_min_mhz, n_components)
}

/// Same as [`extract_components`], starting from an existing spectrum.
pub fn extract_from_spectrum(
    spectrum: &SpectrumRecord,
    b1_label: &str,
    f_min_mhz: f64,
    n_components: usize,
) -> Result<ComponentTable, SpectralError> {
    let start = spectrum.x.partition_point(|&x| x < f_min_mhz);
    if spectrum.x.len() - start < 3 * n_components + 2 {
        return Err(SpectralError::TooShort {
            needed: 3 * n_components + 2,
            got: spectrum.x.len() - start,
        });
    }
    let masked = SpectrumRecord::new(
        spectrum.x[start..].to_vec(),
        spectrum.y[start..].to_vec(),
        spectrum.axis,
    )?;
    let fit = fit_lorentzians(&masked, n_components, None, &FitOptions::default())?;
    let components = fit
        .peaks
        .iter()
        .map(|p: &PeakEstimate| ComponentEstimate {
            freq_mhz: Measurement::new(p.center, p.center_sigma),
            width_mhz: Measurement::new(WIDTH_CAL * p.hwhm, WIDTH_CAL * p.hwhm_sigma),
            amplitude: p.amplitude,
        })
        .collect();
    Ok(ComponentTable {
        b1_label: b1_label.to_string(),
        components,
    })
}

/// Recovers the absolute detuning of one oscillation component from its
/// frequencies measured at two drive amplitudes.
///
/// `omega_small` is the frequency measured at drive amplitude `b1`,
/// `omega_large` the one at `xi * b1` with `xi > 1`: the naming refers to
/// the drive magnitude each belongs to, not to which frequency is bigger
/// (on resonance they coincide at zero detuning). With
/// `Omega^2 = W^2 + delta^2` and the drive-proportional `W` scaling by
/// `xi` while `delta` stays fixed,
/// `delta^2 = (xi^2 Omega_small^2 - Omega_large^2) / (xi^2 - 1)`.
/// Any common frequency unit works; `delta` comes back in the same unit.
///
/// A negative discriminant means the pair cannot come from a fixed
/// detuning; the error reports how many sigma it sits below zero.
pub fn larmor_detuning(
    omega_small: Measurement,
    omega_large: Measurement,
    xi: f64,
) -> Result<Measurement, SpectralError> {
    if !(xi.is_finite() && xi > 1.0) {
        return Err(SpectralError::BadSettings(format!(
            "amplitude ratio xi must exceed 1, got {xi}"
        )));
    }
    let xi2 = xi * xi;
    let disc = xi2 * omega_small.value * omega_small.value
        - omega_large.value * omega_large.value;
    let denom = xi2 - 1.0;
    let sigma_disc = ((2.0 * xi2 * omega_small.value * omega_small.sigma).powi(2)
        + (2.0 * omega_large.value * omega_large.sigma).powi(2))
    .sqrt();
    if disc < 0.0 {
        return Err(SpectralError::NegativeDiscriminant {
            value: disc / denom,
            sigma_deficit: if sigma_disc > 0.0 {
                disc.abs() / sigma_disc
            } else {
                f64::INFINITY
            },
        });
    }
    let delta = (disc / denom).sqrt();
    let sigma = if delta > 0.0 {
        let ds = xi2 * omega_small.value / (denom * delta);
        let dl = -omega_large.value / (denom * delta);
        ((ds * omega_small.sigma).powi(2) + (dl * omega_large.sigma).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(Measurement::new(delta, sigma))
}

/// Ratio of the coupling factors behind the high- and low-frequency
/// oscillation components, from each component's frequency at two drive
/// amplitudes.
///
/// `low` and `high` are the low- and high-frequency components;
/// each holds `[Omega(b1), Omega(xi b1)]`. Squared differences cancel
/// each component's (drive-independent) detuning:
/// `kappa_high / kappa_low = sqrt((high[1]^2 - high[0]^2) /
/// (low[1]^2 - low[0]^2))`, independent of both detunings and of the
/// amplitude pair itself as long as both components share it.
pub fn kappa_ratio(
    low: &[Measurement; 2],
    high: &[Measurement; 2],
) -> Result<Measurement, SpectralError> {
    let numer = high[1].value * high[1].value - high[0].value * high[0].value;
    let denom = low[1].value * low[1].value - low[0].value * low[0].value;
    if denom <= 0.0 || numer <= 0.0 {
        return Err(SpectralError::InconsistentMeasurement(format!(
            "squared frequency differences must be positive (numerator {numer}, \
             denominator {denom}); the second entry must be at the higher drive"
        )));
    }
    let ratio = (numer / denom).sqrt();
    // d(ratio)/dH1 = H1 / (ratio denom), d/dH0 = -H0 / (ratio denom),
    // d/dL1 = -ratio L1 / denom, d/dL0 = +ratio L0 / denom.
    let var = (high[1].value * high[1].sigma / (ratio * denom)).powi(2)
        + (high[0].value * high[0].sigma / (ratio * denom)).powi(2)
        + (ratio * low[1].value * low[1].sigma / denom).powi(2)
        + (ratio * low[0].value * low[0].sigma / denom).powi(2);
    Ok(Measurement::new(ratio, var.sqrt()))
}

/// [`kappa_ratio`] straight from two extracted component tables, one per
/// drive amplitude; `table_base` at `b1`, `table_scaled` at the higher
/// amplitude. Each table must hold a low- and a high-frequency component.
pub fn kappa_ratio_from_tables(
    table_base: &ComponentTable,
    table_scaled: &ComponentTable,
) -> Result<Measurement, SpectralError> {
    let (low_b, high_b) = table_base.low_high()?;
    let (low_s, high_s) = table_scaled.low_high()?;
    kappa_ratio(
        &[low_b.freq_mhz, low_s.freq_mhz],
        &[high_b.freq_mhz, high_s.freq_mhz],
    )
}

/// Converts a detuning in MHz to a resonance-field offset in mT for a
/// spin with the given g-factor.
pub fn detuning_to_field(detuning: Measurement, g: f64) -> Result<Measurement, SpectralError> {
    if !(g.is_finite() && g > 0.0) {
        return Err(SpectralError::BadSettings(format!(
            "g-factor must be positive, got {g}"
        )));
    }
    let scale = 1.0 / (g * crate::constants::MHZ_PER_MT_PER_G);
    Ok(Measurement::new(
        detuning.value * scale,
        detuning.sigma * scale,
    ))
}

/// Agreement between a spectral linewidth and the width implied by a
/// time-domain envelope decay fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WidthConsistency {
    /// Width implied by the decay time: `10^3 / (2 pi T_ns)` MHz.
    pub expected_mhz: Measurement,
    /// Calibrated spectral width.
    pub measured_mhz: Measurement,
    /// `|measured - expected|` in units of the combined sigma.
    pub discrepancy_sigma: f64,
}

impl WidthConsistency {
    pub fn consistent_within(&self, n_sigma: f64) -> bool {
        self.discrepancy_sigma <= n_sigma
    }
}

/// Cross-checks a fitted envelope decay time (ns) against a calibrated
/// spectral width for the same component.
pub fn decay_width_consistency(
    decay_ns: Measurement,
    width_mhz: Measurement,
) -> WidthConsistency {
    let t = decay_ns.value;
    let expected = 1e3 / (std::f64::consts::TAU * t);
    let expected_sigma = expected * decay_ns.sigma / t;
    let combined = (expected_sigma * expected_sigma + width_mhz.sigma * width_mhz.sigma).sqrt();
    let discrepancy = (width_mhz.value - expected).abs();
    WidthConsistency {
        expected_mhz: Measurement::new(expected, expected_sigma),
        measured_mhz: width_mhz,
        discrepancy_sigma: if combined > 0.0 {
            discrepancy / combined
        } else if discrepancy == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize_transient, uniform_grid, OscComponent};
    use approx::assert_relative_eq;

    fn osc(freq_mhz: f64, amplitude: f64, decay_ns: Option<f64>) -> OscComponent {
        OscComponent {
            freq_mhz,
            amplitude,
            decay_ns,
            phase_rad: 0.0,
        }
    }

    fn transient(components: &[OscComponent], stop_ns: f64) -> TransientRecord {
        synthesize_transient(
            components,
            &uniform_grid(0.0, stop_ns, 2.0).unwrap(),
            0.0,
            0,
        )
        .unwrap()
    }

    #[test]
    fn axis_spans_zero_to_nyquist() {
        let rec = transient(&[osc(10.0, 1.0, None)], 800.0);
        let spec = fft_magnitude(&rec, &FftSettings::default()).unwrap();
        assert_eq!(spec.x[0], 0.0);
        // 2 ns sampling: Nyquist at 250 MHz.
        assert_relative_eq!(*spec.x.last().unwrap(), 250.0, max_relative = 1e-9);
        let df = spec.x[1] - spec.x[0];
        // 401 samples padded fourfold: bin = 1 / (1604 * 0.002 us).
        assert_relative_eq!(df, 1.0 / (1604.0 * 0.002), max_relative = 1e-9);
    }

    #[test]
    fn peak_lands_on_oscillation_frequency() {
        for f in [5.0, 10.0, 17.5, 40.0] {
            let rec = transient(&[osc(f, 1.0, None)], 800.0);
            let spec = fft_magnitude(&rec, &FftSettings::default()).unwrap();
            let (fp, height) = dominant_peak(&spec, 1.0).unwrap();
            assert!(
                (fp - f).abs() < 0.2,
                "peak at {fp} MHz for input {f} MHz"
            );
            // Unit-amplitude cosine component: scaled magnitude near 1.
            assert!((0.7..1.3).contains(&height), "height {height} at {f} MHz");
        }
    }

    #[test]
    fn hann_window_suppresses_leakage() {
        // A frequency between bins leaks badly with a rectangular
        // window; Hann should push distant skirts down.
        let rec = transient(&[osc(10.37, 1.0, None)], 800.0);
        let rect = fft_magnitude(&rec, &FftSettings::default()).unwrap();
        let hann = fft_magnitude(
            &rec,
            &FftSettings {
                window: Window::Hann,
                zero_pad_factor: 4,
            },
        )
        .unwrap();
        let skirt = |s: &SpectrumRecord| {
            s.x.iter()
                .zip(&s.y)
                .filter(|(x, _)| (30.0..60.0).contains(*x))
                .map(|(_, y)| *y)
                .fold(0.0f64, f64::max)
        };
        assert!(skirt(&hann) < 0.3 * skirt(&rect));
    }

    #[test]
    fn nonuniform_grid_is_rejected() {
        let tau = vec![0.0, 2.0, 4.0, 9.0, 12.0, 14.0, 16.0, 18.0];
        let q = vec![0.0; 8];
        let rec = TransientRecord::new(tau, q, Default::default()).unwrap();
        assert!(matches!(
            fft_magnitude(&rec, &FftSettings::default()),
            Err(SpectralError::Record(_))
        ));
    }

    #[test]
    fn zero_pad_factor_zero_is_rejected() {
        let rec = transient(&[osc(10.0, 1.0, None)], 800.0);
        let settings = FftSettings {
            zero_pad_factor: 0,
            ..Default::default()
        };
        assert!(matches!(
            fft_magnitude(&rec, &settings),
            Err(SpectralError::BadSettings(_))
        ));
    }

    #[test]
    fn two_components_extracted_with_frequencies() {
        let rec = transient(
            &[osc(10.0, 1.0, Some(500.0)), osc(32.0, 0.6, Some(500.0))],
            800.0,
        );
        let table = extract_components(&rec, &FftSettings::default(), 2.0, 2).unwrap();
        let (low, high) = table.low_high().unwrap();
        assert_relative_eq!(low.freq_mhz.value, 10.0, epsilon = 0.3);
        assert_relative_eq!(high.freq_mhz.value, 32.0, epsilon = 0.3);
        assert!(low.amplitude > high.amplitude);
    }

    #[test]
    fn calibrated_width_tracks_decay_rate() {
        // The conversion constant is frozen at a span-to-decay ratio of 1.6,
        // where the line width is dominated by the record cut-off, not the
        // decay itself. Scaling the window with the decay keeps the line
        // shape self-similar, so the converted width must track 1/(2 pi T);
        // the residual percent-level drift is grid discreteness.
        for t_ns in [400.0, 500.0, 600.0] {
            let rec = transient(&[osc(25.0, 1.0, Some(t_ns))], 1.6 * t_ns);
            let table = extract_components(&rec, &FftSettings::default(), 5.0, 1).unwrap();
            let width = table.components[0].width_mhz.value;
            let expected = 1e3 / (std::f64::consts::TAU * t_ns);
            assert_relative_eq!(width, expected, max_relative = 0.05);
        }
    }

    #[test]
    fn width_cal_regenerates_from_calibration_run() {
        // Freezes WIDTH_CAL: damped cosine, T = 500 ns, standard
        // acquisition window (0..800 ns, 2 ns), default pipeline.
        let rec = transient(&[osc(25.0, 1.0, Some(500.0))], 800.0);
        let spec = fft_magnitude(&rec, &FftSettings::default()).unwrap();
        let table = extract_from_spectrum(&spec, "cal", 5.0, 1).unwrap();
        let raw_hwhm = table.components[0].width_mhz.value / WIDTH_CAL;
        let gamma = 1e3 / (std::f64::consts::TAU * 500.0);
        let cal = gamma / raw_hwhm;
        assert_relative_eq!(cal, WIDTH_CAL, max_relative = 0.005);
    }

    #[test]
    fn detuning_recovered_from_two_drive_levels() {
        // W = 14, delta = 16: Omega(b1) = sqrt(196 + 256), at 2 b1
        // Omega = sqrt(784 + 256).
        let w: f64 = 14.0;
        let delta: f64 = 16.0;
        let o1 = (w * w + delta * delta).sqrt();
        let o2 = (4.0 * w * w + delta * delta).sqrt();
        let m = larmor_detuning(
            Measurement::new(o1, 0.1),
            Measurement::new(o2, 0.1),
            2.0,
        )
        .unwrap();
        assert_relative_eq!(m.value, delta, max_relative = 1e-12);
        // Exact gradient check.
        let d1 = 4.0 * o1 / (3.0 * delta);
        let d2 = -o2 / (3.0 * delta);
        let sigma = ((d1 * 0.1).powi(2) + (d2 * 0.1).powi(2)).sqrt();
        assert_relative_eq!(m.sigma, sigma, max_relative = 1e-12);
    }

    #[test]
    fn inconsistent_frequencies_report_sigma_deficit() {
        // Omega at the higher drive larger than xi times the lower one:
        // impossible for a fixed detuning.
        let err = larmor_detuning(
            Measurement::new(10.0, 0.5),
            Measurement::new(25.0, 0.5),
            2.0,
        )
        .unwrap_err();
        match err {
            SpectralError::NegativeDiscriminant {
                value,
                sigma_deficit,
            } => {
                assert!(value < 0.0);
                assert!(sigma_deficit > 0.0 && sigma_deficit.is_finite());
            }
            other => panic!("expected NegativeDiscriminant, got {other}"),
        }
    }

    #[test]
    fn kappa_ratio_is_detuning_independent() {
        let w_low: f64 = 10.0;
        let w_high: f64 = 13.0;
        let s = 0.01;
        let mut values = Vec::new();
        for delta_h in [0.0, 7.0, 19.0] {
            let low = [
                Measurement::new(w_low, s),
                Measurement::new(2.0 * w_low, s),
            ];
            let high = [
                Measurement::new((w_high * w_high + delta_h * delta_h).sqrt(), s),
                Measurement::new((4.0 * w_high * w_high + delta_h * delta_h).sqrt(), s),
            ];
            values.push(kappa_ratio(&low, &high).unwrap().value);
        }
        for v in &values {
            assert_relative_eq!(*v, 1.3, max_relative = 1e-12);
        }
    }

    #[test]
    fn kappa_ratio_rejects_swapped_drive_order() {
        let low = [Measurement::new(20.0, 0.1), Measurement::new(10.0, 0.1)];
        let high = [Measurement::new(13.0, 0.1), Measurement::new(26.0, 0.1)];
        assert!(matches!(
            kappa_ratio(&low, &high),
            Err(SpectralError::InconsistentMeasurement(_))
        ));
    }

    #[test]
    fn detuning_converts_to_field_offset() {
        // g = 2: 27.992 MHz per mT, so 27.992 MHz detunes by 1 mT.
        let g = 2.0;
        let mhz_per_mt = g * crate::constants::MHZ_PER_MT_PER_G;
        let m = detuning_to_field(Measurement::new(mhz_per_mt, mhz_per_mt / 10.0), g).unwrap();
        assert_relative_eq!(m.value, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.sigma, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn width_consistency_flags_disagreement() {
        let decay = Measurement::new(500.0, 10.0);
        let gamma = 1e3 / (std::f64::consts::TAU * 500.0);
        let ok = decay_width_consistency(decay, Measurement::new(gamma, 0.01));
        assert!(ok.consistent_within(2.0));
        assert!((ok.expected_mhz.value - 0.318).abs() < 1e-3);
        let bad = decay_width_consistency(decay, Measurement::new(3.0 * gamma, 0.01));
        assert!(!bad.consistent_within(2.0));
        assert!(bad.discrepancy_sigma > 10.0);
    }
}
