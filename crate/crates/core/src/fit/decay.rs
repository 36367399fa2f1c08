//! Envelope decay analysis for oscillatory transients.
//!
//! A damped oscillation `A exp(-tau/T) (1 - cos(w tau))` touches
//! `2 A exp(-tau/T)` at every odd half-period, so the local maxima of the
//! transient sample the decay envelope at twice the amplitude. Detecting
//! those maxima and fitting an exponential through them recovers `T`
//! without any knowledge of the oscillation frequency.

use super::engine::{solve_damped_lsq, FitOptions};
use super::FitError;
use crate::records::TransientRecord;

/// One detected envelope maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximumPoint {
    /// Refined maximum position in ns.
    pub tau_ns: f64,
    /// Refined transient value at the maximum.
    pub q: f64,
}

/// Result of an exponential envelope fit `q(tau) = A exp(-tau / T)`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    /// Fitted amplitude `A`.
    pub amplitude: f64,
    /// One-sigma uncertainty on the amplitude.
    pub amplitude_sigma: f64,
    /// Fitted decay time `T` in ns.
    pub decay_ns: f64,
    /// One-sigma uncertainty on the decay time in ns.
    pub decay_sigma_ns: f64,
    /// Sum of squared residuals at the optimum.
    pub chi2: f64,
    /// Whether the refinement converged.
    pub converged: bool,
}

impl DecayFit {
    /// True when the fitted decay is too slow to resolve on a grid
    /// spanning `span_ns`: the envelope loses less than ~10% over the
    /// record, so the decay time is effectively unmeasured. A nonpositive
    /// fitted `T` (an envelope that grows within the record) counts as
    /// undamped too.
    pub fn is_effectively_undamped(&self, span_ns: f64) -> bool {
        !(self.decay_ns > 0.0) || self.decay_ns > 10.0 * span_ns
    }
}

/// Smoothing window for maxima detection, in samples. Centered and
/// truncated at the record edges.
const SMOOTH_WINDOW: usize = 5;

/// Noise wiggles in the troughs of the oscillation satisfy the three-point
/// test too; a candidate only counts as an envelope crest when it reaches
/// this fraction of the tallest maximum.
const REL_FLOOR: f64 = 0.05;

fn moving_average(y: &[f64]) -> Vec<f64> {
    let half = SMOOTH_WINDOW / 2;
    let n = y.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Detects local maxima of the transient envelope.
///
/// The record is smoothed with a centered moving average to suppress
/// single-sample noise spikes, then strict three-point maxima of the
/// smoothed trace are refined by fitting a parabola through the raw
/// samples around each candidate. The refinement shift is clamped to
/// half a sample so a noisy neighborhood cannot throw the point off.
///
/// Requires at least 5 samples; returns [`FitError::NoMaxima`] when the
/// trace is monotonic or otherwise has no interior maximum.
pub fn detect_envelope_maxima(record: &TransientRecord) -> Result<Vec<MaximumPoint>, FitError> {
    let tau = &record.tau_ns;
    let q = &record.q;
    if tau.len() < SMOOTH_WINDOW {
        return Err(FitError::TooFewPoints {
            needed: SMOOTH_WINDOW,
            got: tau.len(),
        });
    }
    let smooth = moving_average(q);
    let mut maxima = Vec::new();
    for i in 1..smooth.len() - 1 {
        if !(smooth[i] > smooth[i - 1] && smooth[i] > smooth[i + 1]) {
            continue;
        }
        // Parabolic refinement on the raw samples: vertex of the parabola
        // through (i-1, i, i+1), with the shift clamped to +-0.5 samples.
        let (y0, y1, y2) = (q[i - 1], q[i], q[i + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        let shift = if denom.abs() > f64::EPSILON * (y0.abs() + y1.abs() + y2.abs() + 1.0) {
            (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let dt_left = tau[i] - tau[i - 1];
        let dt_right = tau[i + 1] - tau[i];
        let tau_ref = if shift >= 0.0 {
            tau[i] + shift * dt_right
        } else {
            tau[i] + shift * dt_left
        };
        let q_ref = y1 - 0.25 * (y0 - y2) * shift;
        maxima.push(MaximumPoint {
            tau_ns: tau_ref,
            q: q_ref,
        });
    }
    let tallest = maxima.iter().map(|m| m.q).fold(f64::NEG_INFINITY, f64::max);
    if tallest > 0.0 {
        maxima.retain(|m| m.q >= REL_FLOOR * tallest);
    }
    if maxima.is_empty() {
        return Err(FitError::NoMaxima);
    }
    Ok(maxima)
}

/// Fits `q = A exp(-tau / T)` through envelope maxima.
///
/// All values must be strictly positive (the model cannot represent
/// zero or negative points). A log-linear least-squares solve provides
/// the starting point; a damped least-squares pass on the original
/// nonlinear model refines it so the result minimizes the untransformed
/// residuals. Two points determine the model exactly.
pub fn fit_exp_decay(points: &[MaximumPoint]) -> Result<DecayFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    for p in points {
        if !(p.q > 0.0 && p.q.is_finite() && p.tau_ns.is_finite()) {
            return Err(FitError::NonPositiveValue {
                tau_ns: p.tau_ns,
                q: p.q,
            });
        }
    }

    // Log-linear initialization: ln q = ln A - tau / T.
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p.tau_ns, p.q.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let (ln_a0, slope) = if det.abs() > f64::EPSILON * (n * sxx + sx * sx) {
        (
            (sy * sxx - sx * sxy) / det,
            (n * sxy - sx * sy) / det,
        )
    } else {
        // All points share one tau; the decay is unconstrained.
        return Err(FitError::Initialization(
            "envelope maxima do not span distinct delays".into(),
        ));
    };
    let a0 = ln_a0.exp();

    // Refine in rate space, q = A exp(-r tau): unlike T = 1/r, the rate
    // stays finite and well-scaled when the envelope hardly decays, and a
    // slightly negative rate (growing envelope) is a representable optimum
    // rather than a pole.
    let pts: Vec<MaximumPoint> = points.to_vec();
    let model = move |p: &[f64]| -> Vec<f64> {
        let (a, r) = (p[0], p[1]);
        pts.iter()
            .map(|m| m.q - a * (-m.tau_ns * r).exp())
            .collect()
    };
    let fit = solve_damped_lsq(model, &[a0, -slope], &FitOptions::default())?;
    let rate = fit.params[1];
    let rate_sigma = fit.sigma(1);
    let decay_ns = 1.0 / rate;
    Ok(DecayFit {
        amplitude: fit.params[0],
        amplitude_sigma: fit.sigma(0),
        decay_ns,
        // First-order transform of sigma(r) through T = 1/r.
        decay_sigma_ns: rate_sigma * decay_ns * decay_ns,
        chi2: fit.chi2,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{TransientMeta, TransientRecord};
    use crate::synth::{synthesize_transient, uniform_grid, OscComponent};
    use approx::assert_relative_eq;

    fn damped_record(freq_mhz: f64, decay_ns: f64, sigma: f64, seed: u64) -> TransientRecord {
        let comp = OscComponent {
            freq_mhz,
            amplitude: 1.0,
            decay_ns: Some(decay_ns),
            phase_rad: 0.0,
        };
        synthesize_transient(&[comp], &uniform_grid(0.0, 800.0, 2.0).unwrap(), sigma, seed)
            .unwrap()
    }

    #[test]
    fn maxima_sit_at_odd_half_periods() {
        // 10 MHz: maxima at 50, 150, 250, ... ns.
        let rec = damped_record(10.0, 1e9, 0.0, 0);
        let maxima = detect_envelope_maxima(&rec).unwrap();
        assert!(maxima.len() >= 7);
        for (k, m) in maxima.iter().enumerate() {
            let expect = 50.0 + 100.0 * k as f64;
            assert!(
                (m.tau_ns - expect).abs() < 2.0,
                "maximum {k} at {} ns, expected {expect}",
                m.tau_ns
            );
            assert_relative_eq!(m.q, 2.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn refinement_beats_grid_resolution() {
        // 7 MHz puts the first maximum at 1000/14 = 71.43 ns, between
        // 2 ns grid points; the parabola should land within 0.5 ns.
        let rec = damped_record(7.0, 1e9, 0.0, 0);
        let maxima = detect_envelope_maxima(&rec).unwrap();
        assert!((maxima[0].tau_ns - 1000.0 / 14.0).abs() < 0.5);
    }

    #[test]
    fn decay_fit_recovers_truth_noiseless() {
        let rec = damped_record(10.0, 300.0, 0.0, 0);
        let maxima = detect_envelope_maxima(&rec).unwrap();
        let fit = fit_exp_decay(&maxima).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.decay_ns, 300.0, max_relative = 5e-3);
        assert_relative_eq!(fit.amplitude, 2.0, max_relative = 5e-3);
        assert!(!fit.is_effectively_undamped(800.0));
    }

    #[test]
    fn decay_fit_flags_undamped_envelope() {
        let rec = damped_record(10.0, 1e9, 0.0, 0);
        let maxima = detect_envelope_maxima(&rec).unwrap();
        let fit = fit_exp_decay(&maxima).unwrap();
        assert!(fit.is_effectively_undamped(800.0));
    }

    #[test]
    fn noisy_decay_recovered_within_uncertainty() {
        let mut ok = 0;
        for seed in 0..10u64 {
            let rec = damped_record(10.0, 300.0, 0.02, seed);
            let maxima = detect_envelope_maxima(&rec).unwrap();
            let fit = fit_exp_decay(&maxima).unwrap();
            if (fit.decay_ns - 300.0).abs() < 4.0 * fit.decay_sigma_ns.max(1.0) {
                ok += 1;
            }
        }
        assert!(ok >= 9, "only {ok}/10 noisy fits recovered the decay");
    }

    #[test]
    fn two_points_fit_exactly() {
        let pts = [
            MaximumPoint {
                tau_ns: 100.0,
                q: 1.0,
            },
            MaximumPoint {
                tau_ns: 300.0,
                q: 0.25,
            },
        ];
        let fit = fit_exp_decay(&pts).unwrap();
        // Exact interpolation: T = 200 / ln 4, A = q0 * exp(100 / T).
        let t_expect = 200.0 / 4.0f64.ln();
        assert_relative_eq!(fit.decay_ns, t_expect, max_relative = 1e-8);
        assert_relative_eq!(
            fit.amplitude,
            (100.0 / t_expect).exp(),
            max_relative = 1e-8
        );
        assert!(fit.chi2 < 1e-20);
    }

    #[test]
    fn monotonic_trace_has_no_maxima() {
        let tau: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let q: Vec<f64> = tau.iter().map(|t| t * 0.1).collect();
        let rec = TransientRecord::new(tau, q, TransientMeta::default()).unwrap();
        assert!(matches!(
            detect_envelope_maxima(&rec),
            Err(FitError::NoMaxima)
        ));
    }

    #[test]
    fn nonpositive_point_is_rejected() {
        let pts = [
            MaximumPoint { tau_ns: 0.0, q: 1.0 },
            MaximumPoint {
                tau_ns: 100.0,
                q: -0.2,
            },
            MaximumPoint {
                tau_ns: 200.0,
                q: 0.5,
            },
        ];
        assert!(matches!(
            fit_exp_decay(&pts),
            Err(FitError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn single_point_is_rejected() {
        let pts = [MaximumPoint { tau_ns: 0.0, q: 1.0 }];
        assert!(matches!(
            fit_exp_decay(&pts),
            Err(FitError::TooFewPoints { needed: 2, got: 1 })
        ));
    }
}
