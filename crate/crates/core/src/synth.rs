//! Synthetic measurement generator: damped nutation transients and field
//! sweeps with seeded Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{mhz_to_rad_per_us, ns_to_us};
use crate::fit::LorentzianPeak;
use crate::records::{RecordError, SweepRecord, TransientMeta, TransientRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("component parameters invalid: {0}")]
    InvalidComponent(String),
    #[error("noise sigma must be non-negative and finite (got {0})")]
    InvalidSigma(f64),
    #[error("grid spec invalid: {0}")]
    InvalidGrid(String),
    #[error("cannot accumulate an empty set of records")]
    EmptyAccumulation,
    #[error("records share no common grid (record {index} differs)")]
    GridMismatch { index: usize },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// One oscillating component of a transient:
/// A * exp(-tau/T) * (1 - cos(Omega tau + phase)).
///
/// `decay_ns = None` means no damping. With zero phase every component
/// vanishes at tau = 0, matching the zero pulse response of the physical
/// observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscComponent {
    pub freq_mhz: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_ns: Option<f64>,
    #[serde(default)]
    pub phase_rad: f64,
}

impl OscComponent {
    pub fn new(
        freq_mhz: f64,
        amplitude: f64,
        decay_ns: Option<f64>,
        phase_rad: f64,
    ) -> Result<Self, SynthError> {
        if !(freq_mhz >= 0.0) || !freq_mhz.is_finite() {
            return Err(SynthError::InvalidComponent(format!(
                "frequency must be non-negative (got {freq_mhz} MHz)"
            )));
        }
        if !amplitude.is_finite() {
            return Err(SynthError::InvalidComponent("amplitude must be finite".into()));
        }
        if let Some(t) = decay_ns {
            if !(t > 0.0) {
                return Err(SynthError::InvalidComponent(format!(
                    "decay time must be positive (got {t} ns)"
                )));
            }
        }
        if !phase_rad.is_finite() {
            return Err(SynthError::InvalidComponent("phase must be finite".into()));
        }
        Ok(Self {
            freq_mhz,
            amplitude,
            decay_ns,
            phase_rad,
        })
    }

    fn eval(&self, tau_ns: f64) -> f64 {
        let envelope = match self.decay_ns {
            Some(t) => (-tau_ns / t).exp(),
            None => 1.0,
        };
        let angle = mhz_to_rad_per_us(self.freq_mhz) * ns_to_us(tau_ns) + self.phase_rad;
        self.amplitude * envelope * (1.0 - angle.cos())
    }
}

/// Evenly spaced grid from start to stop inclusive.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, SynthError> {
    if !(step > 0.0) || !step.is_finite() || !(stop > start) || !start.is_finite() {
        return Err(SynthError::InvalidGrid(format!(
            "need finite start < stop and step > 0 (got {start}, {stop}, {step})"
        )));
    }
    let n = ((stop - start) / step).round() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// The acquisition grid used throughout the reference measurements:
/// 0 to 800 ns in 2 ns steps (401 points).
pub fn default_tau_grid() -> Vec<f64> {
    uniform_grid(0.0, 800.0, 2.0).expect("static grid")
}

fn noise_vec(n: usize, sigma: f64, seed: u64) -> Result<Vec<f64>, SynthError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SynthError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Sum of damped oscillation components on a tau grid plus i.i.d. Gaussian
/// noise drawn from a counter-based generator, so a seed pins the record
/// exactly.
pub fn synthesize_transient(
    components: &[OscComponent],
    tau_grid_ns: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<TransientRecord, SynthError> {
    for c in components {
        // Re-validate: components may have been built literally.
        OscComponent::new(c.freq_mhz, c.amplitude, c.decay_ns, c.phase_rad)?;
    }
    let noise = noise_vec(tau_grid_ns.len(), noise_sigma, seed)?;
    let q: Vec<f64> = tau_grid_ns
        .iter()
        .zip(&noise)
        .map(|(&tau, &eps)| components.iter().map(|c| c.eval(tau)).sum::<f64>() + eps)
        .collect();
    let meta = TransientMeta {
        b1_label: "synthetic".to_string(),
        b1_scale: None,
        seed: Some(seed),
        noise_sigma,
        n_shots: 1,
        components: components.to_vec(),
    };
    Ok(TransientRecord::new(tau_grid_ns.to_vec(), q, meta)?)
}

/// Adds seeded Gaussian noise to an existing record, e.g. a noiseless
/// model curve. Metadata picks up the seed and combined noise level.
pub fn add_noise(
    record: &TransientRecord,
    noise_sigma: f64,
    seed: u64,
) -> Result<TransientRecord, SynthError> {
    let noise = noise_vec(record.len(), noise_sigma, seed)?;
    let q: Vec<f64> = record.q.iter().zip(&noise).map(|(q, e)| q + e).collect();
    let mut meta = record.meta.clone();
    meta.seed = Some(seed);
    meta.noise_sigma = (meta.noise_sigma.powi(2) + noise_sigma.powi(2)).sqrt();
    Ok(TransientRecord::new(record.tau_ns.clone(), q, meta)?)
}

/// Superposed Lorentzian resonances on a field grid plus Gaussian noise.
pub fn synthesize_sweep(
    peaks: &[LorentzianPeak],
    b0_grid_mt: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<SweepRecord, SynthError> {
    for p in peaks {
        if !(p.hwhm > 0.0) || !(p.amplitude >= 0.0) {
            return Err(SynthError::InvalidComponent(format!(
                "Lorentzian peak needs hwhm > 0 and amplitude >= 0 (got {p:?})"
            )));
        }
    }
    let noise = noise_vec(b0_grid_mt.len(), noise_sigma, seed)?;
    let q: Vec<f64> = b0_grid_mt
        .iter()
        .zip(&noise)
        .map(|(&b, &eps)| peaks.iter().map(|p| p.eval(b)).sum::<f64>() + eps)
        .collect();
    Ok(SweepRecord::new(b0_grid_mt.to_vec(), q, Some(seed), noise_sigma)?)
}

/// Detection-limit model: signal-to-noise per pulse per spin pair is
/// sqrt(n)/1e6 after n accumulated shots.
///
/// Worked example: an 8 h measurement of 300 us shots accumulates
/// n = 8*3600/300e-6 = 9.6e7 shots, giving ~9.8e-3 per pair, i.e. unit SNR
/// from roughly a hundred responding pairs.
pub fn snr_per_pair(n_shots: u64) -> f64 {
    (n_shots as f64).sqrt() / 1e6
}

/// Pointwise mean of repeated records sharing one grid. Gaussian noise
/// shrinks by 1/sqrt(k); metadata records the combined shot count.
pub fn accumulate(records: &[TransientRecord]) -> Result<TransientRecord, SynthError> {
    let first = records.first().ok_or(SynthError::EmptyAccumulation)?;
    for (i, r) in records.iter().enumerate().skip(1) {
        if r.tau_ns != first.tau_ns {
            return Err(SynthError::GridMismatch { index: i });
        }
    }
    let k = records.len() as f64;
    let q: Vec<f64> = (0..first.len())
        .map(|i| records.iter().map(|r| r.q[i]).sum::<f64>() / k)
        .collect();
    let rms_sigma =
        (records.iter().map(|r| r.meta.noise_sigma.powi(2)).sum::<f64>() / k).sqrt();
    let meta = TransientMeta {
        b1_label: first.meta.b1_label.clone(),
        b1_scale: first.meta.b1_scale,
        seed: None,
        noise_sigma: rms_sigma / k.sqrt(),
        n_shots: records.iter().map(|r| r.meta.n_shots).sum(),
        components: first.meta.components.clone(),
    };
    Ok(TransientRecord::new(first.tau_ns.clone(), q, meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_std(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn zero_phase_components_vanish_at_zero_tau() {
        let c = OscComponent::new(10.0, 1.0, Some(500.0), 0.0).unwrap();
        let rec = synthesize_transient(&[c], &default_tau_grid(), 0.0, 1).unwrap();
        assert_eq!(rec.q[0], 0.0);
        assert_eq!(rec.len(), 401);
    }

    #[test]
    fn undamped_component_is_pure_one_minus_cos() {
        let c = OscComponent::new(10.0, 0.7, None, 0.0).unwrap();
        let grid = default_tau_grid();
        let rec = synthesize_transient(&[c], &grid, 0.0, 0).unwrap();
        for (&tau, &q) in grid.iter().zip(&rec.q) {
            let expected = 0.7 * (1.0 - (mhz_to_rad_per_us(10.0) * ns_to_us(tau)).cos());
            assert!((q - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn add_noise_matches_direct_synthesis() {
        let c = OscComponent::new(10.0, 1.0, Some(500.0), 0.0).unwrap();
        let grid = default_tau_grid();
        let clean = synthesize_transient(&[c], &grid, 0.0, 0).unwrap();
        let direct = synthesize_transient(&[c], &grid, 0.05, 9).unwrap();
        let added = add_noise(&clean, 0.05, 9).unwrap();
        assert_eq!(added.q, direct.q);
        assert_eq!(added.meta.seed, Some(9));
        assert!((added.meta.noise_sigma - 0.05).abs() < 1e-15);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let c = OscComponent::new(10.0, 1.0, Some(500.0), 0.0).unwrap();
        let grid = default_tau_grid();
        let a = synthesize_transient(&[c], &grid, 0.05, 42).unwrap();
        let b = synthesize_transient(&[c], &grid, 0.05, 42).unwrap();
        assert_eq!(a.q, b.q);
        let c2 = synthesize_transient(&[c], &grid, 0.05, 43).unwrap();
        assert_ne!(a.q, c2.q);
    }

    #[test]
    fn noise_amplitude_is_calibrated() {
        let grid = uniform_grid(0.0, 8000.0, 2.0).unwrap();
        let rec = synthesize_transient(&[], &grid, 0.1, 7).unwrap();
        let s = sample_std(&rec.q);
        assert!((s - 0.1).abs() < 0.005, "sample std {s}");
    }

    #[test]
    fn accumulate_shrinks_noise() {
        let grid = default_tau_grid();
        let records: Vec<_> = (0..100)
            .map(|k| synthesize_transient(&[], &grid, 0.1, 1000 + k).unwrap())
            .collect();
        let acc = accumulate(&records).unwrap();
        let s = sample_std(&acc.q);
        assert!(
            (s - 0.01).abs() < 0.15 * 0.01,
            "accumulated noise std {s}, expected ~0.01"
        );
        assert_eq!(acc.meta.n_shots, 100);
        assert!((acc.meta.noise_sigma - 0.01).abs() < 1e-12);
    }

    #[test]
    fn accumulate_preserves_signal() {
        let c = OscComponent::new(12.0, 1.0, Some(400.0), 0.0).unwrap();
        let grid = default_tau_grid();
        let records: Vec<_> = (0..8)
            .map(|k| synthesize_transient(&[c], &grid, 0.0, k).unwrap())
            .collect();
        let acc = accumulate(&records).unwrap();
        // The mean of eight identical noiseless records differs from any one
        // of them only by summation round-off.
        for (a, b) in acc.q.iter().zip(&records[0].q) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn accumulate_rejects_mismatched_grids() {
        let a = synthesize_transient(&[], &default_tau_grid(), 0.0, 0).unwrap();
        let b = synthesize_transient(&[], &uniform_grid(0.0, 400.0, 2.0).unwrap(), 0.0, 0).unwrap();
        assert_eq!(
            accumulate(&[a.clone(), b]).unwrap_err(),
            SynthError::GridMismatch { index: 1 }
        );
        assert_eq!(accumulate(&[]).unwrap_err(), SynthError::EmptyAccumulation);
        assert!(accumulate(&[a]).is_ok());
    }

    #[test]
    fn noise_variance_scales_inversely_with_shots() {
        // Accumulations of 4, 16 and 64 records: residual variance must track
        // sigma^2/k within a two-sided 1% chi-squared band.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let grid = default_tau_grid();
        let sigma = 0.2;
        let mut seed = 5000;
        for k in [4usize, 16, 64] {
            let records: Vec<_> = (0..k)
                .map(|_| {
                    seed += 1;
                    synthesize_transient(&[], &grid, sigma, seed).unwrap()
                })
                .collect();
            let acc = accumulate(&records).unwrap();
            let n = acc.len() as f64;
            let stat: f64 =
                acc.q.iter().map(|q| q * q).sum::<f64>() * k as f64 / (sigma * sigma);
            let chi = ChiSquared::new(n).unwrap();
            let (lo, hi) = (chi.inverse_cdf(0.005), chi.inverse_cdf(0.995));
            assert!(
                stat > lo && stat < hi,
                "k={k}: chi2 stat {stat:.1} outside [{lo:.1}, {hi:.1}]"
            );
        }
    }

    #[test]
    fn snr_model() {
        assert_eq!(snr_per_pair(1), 1e-6);
        assert_eq!(snr_per_pair(1_000_000_000_000), 1.0);
        // 8 h of 300 us shots.
        let n = (8.0 * 3600.0 / 300e-6) as u64;
        assert_eq!(n, 96_000_000);
        let snr = snr_per_pair(n);
        assert!((snr - 9.8e-3).abs() < 1e-4, "snr {snr}");
        // Quadrupling the shot count doubles the SNR.
        let base = snr_per_pair(250_000);
        assert!((snr_per_pair(1_000_000) - 2.0 * base).abs() < 1e-15 * base);
    }

    #[test]
    fn grid_construction() {
        let g = uniform_grid(0.0, 800.0, 2.0).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 800.0);
        assert!(uniform_grid(0.0, -1.0, 2.0).is_err());
        assert!(uniform_grid(0.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn component_validation() {
        assert!(OscComponent::new(-1.0, 1.0, None, 0.0).is_err());
        assert!(OscComponent::new(1.0, 1.0, Some(0.0), 0.0).is_err());
        assert!(OscComponent::new(1.0, f64::NAN, None, 0.0).is_err());
    }
}
