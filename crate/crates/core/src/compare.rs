//! Cross-validation of the closed-form nutation model against the
//! density-matrix simulation.
//!
//! The closed form describes one driven spin averaged over a detuning
//! distribution. The simulation produces the same observable for a single
//! disorder realisation, so averaging it over local-field offsets must
//! reproduce the closed-form curve up to a constant amplitude. The
//! comparison metric is the maximum pointwise deviation after a
//! least-squares amplitude match, relative to the reference peak.

use rayon::prelude::*;
use thiserror::Error;

use crate::quantum::{
    rabi_transient_oracle_offset, LocalOffsets, PulseSpec, QuantumError, SpinPairParams,
};
use crate::rabi::{LineShape, RabiError};
use crate::records::{RecordError, TransientMeta, TransientRecord};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Rabi(#[from] RabiError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("bad ensemble settings: {0}")]
    BadSettings(String),
    #[error("curves differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot compare all-zero curves")]
    ZeroCurve,
}

/// Detuning ensemble for [`oracle_ensemble_average`].
#[derive(Debug, Clone)]
pub struct EnsembleSettings {
    /// Weight profile over the detuning offset (peak-normalized).
    pub line: LineShape,
    /// Half-range of the offset grid, rad/us.
    pub half_range: f64,
    /// Number of offset samples (uniform grid, endpoints included).
    pub n_points: usize,
}

impl EnsembleSettings {
    fn validate(&self) -> Result<(), CompareError> {
        if !(self.half_range > 0.0 && self.half_range.is_finite()) {
            return Err(CompareError::BadSettings(format!(
                "half_range must be positive, got {}",
                self.half_range
            )));
        }
        if self.n_points < 3 {
            return Err(CompareError::BadSettings(format!(
                "need at least 3 ensemble points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }
}

/// Disorder-averaged simulated nutation curve: the spin-a Zeeman offset is
/// swept over a uniform grid and the per-offset curves are averaged with
/// the line-shape weights (plain weighted mean, so a flat line shape gives
/// the arithmetic mean).
pub fn oracle_ensemble_average(
    params: &SpinPairParams,
    pulse: &PulseSpec,
    tau_grid_ns: &[f64],
    settings: &EnsembleSettings,
) -> Result<TransientRecord, CompareError> {
    settings.validate()?;
    let n = settings.n_points;
    let offsets: Vec<f64> = (0..n)
        .map(|k| settings.half_range * (2.0 * k as f64 / (n - 1) as f64 - 1.0))
        .collect();

    let curves: Vec<(f64, Vec<f64>)> = offsets
        .par_iter()
        .map(|&x| {
            let off = LocalOffsets {
                zeeman_a: x,
                zeeman_b: 0.0,
            };
            let w = settings.line.profile(x);
            rabi_transient_oracle_offset(params, pulse, tau_grid_ns, &off)
                .map(|rec| (w, rec.q))
        })
        .collect::<Result<_, _>>()?;

    let weight_sum: f64 = curves.iter().map(|(w, _)| w).sum();
    if !(weight_sum > 0.0) {
        return Err(CompareError::BadSettings(
            "line-shape weights sum to zero over the offset grid".into(),
        ));
    }
    let mut q = vec![0.0; tau_grid_ns.len()];
    for (w, curve) in &curves {
        for (acc, v) in q.iter_mut().zip(curve) {
            *acc += w * v;
        }
    }
    for v in &mut q {
        *v /= weight_sum;
    }

    let meta = TransientMeta {
        b1_label: "ensemble".to_string(),
        b1_scale: Some(1.0),
        seed: None,
        noise_sigma: 0.0,
        n_shots: 1,
        components: Vec::new(),
    };
    Ok(TransientRecord::new(tau_grid_ns.to_vec(), q, meta)?)
}

/// Outcome of matching a candidate curve onto a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveMatch {
    /// Least-squares amplitude factor applied to the candidate.
    pub alpha: f64,
    /// max |reference - alpha * candidate| / max |reference|.
    pub max_rel_deviation: f64,
}

/// Compares two curves that should agree up to a constant amplitude.
/// The candidate is scaled by the least-squares factor
/// `alpha = sum(c * r) / sum(c^2)` before taking the maximum deviation.
pub fn match_curves(reference: &[f64], candidate: &[f64]) -> Result<CurveMatch, CompareError> {
    if reference.len() != candidate.len() {
        return Err(CompareError::LengthMismatch(
            reference.len(),
            candidate.len(),
        ));
    }
    let cc: f64 = candidate.iter().map(|c| c * c).sum();
    let peak = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if cc == 0.0 || peak == 0.0 {
        return Err(CompareError::ZeroCurve);
    }
    let cr: f64 = candidate.iter().zip(reference).map(|(c, r)| c * r).sum();
    let alpha = cr / cc;
    let max_dev = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| (r - alpha * c).abs())
        .fold(0.0f64, f64::max);
    Ok(CurveMatch {
        alpha,
        max_rel_deviation: max_dev / peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::nutation_rate;
    use crate::rabi::{delta_analytic, CouplingRegime, QuadratureSettings};
    use crate::synth::uniform_grid;

    #[test]
    fn flat_ensemble_matches_closed_form() {
        // Weakly coupled pair, drive resonant with spin a; spin b far off
        // resonance. The spin-a disorder average must reproduce the
        // closed-form curve up to amplitude.
        let params = SpinPairParams::new(2.0, 1.6, 0.0, 0.0, 350.0).unwrap();
        let b1 = 0.1;
        let pulse = PulseSpec::new(b1, params.larmor_a(), 0.0).unwrap();
        let grid = uniform_grid(0.0, 400.0, 4.0).unwrap();

        // The closed form normalises detuning by the on-resonance
        // oscillation frequency kappa*g*GAMMA*b1, which for kappa = 1/2
        // is exactly the nutation rate w1; the ensemble half-range must
        // be the closed form's truncation in the same units.
        let kappa = CouplingRegime::WeakSelective.kappa();
        let w1 = nutation_rate(params.g_a, b1);
        let truncation = 40.0;
        let settings = EnsembleSettings {
            line: LineShape::flat(1.0).unwrap(),
            half_range: truncation * w1,
            n_points: 4001,
        };
        let ensemble = oracle_ensemble_average(&params, &pulse, &grid, &settings).unwrap();

        let quad = QuadratureSettings {
            truncation,
            ..QuadratureSettings::default()
        };
        let line = LineShape::flat(1.0).unwrap();
        let analytic: Vec<f64> = grid
            .iter()
            .map(|&tau| {
                delta_analytic(tau, b1, params.g_a, kappa, &line, &quad)
                    .unwrap()
                    .value
            })
            .collect();

        let m = match_curves(&analytic, &ensemble.q).unwrap();
        assert!(
            m.max_rel_deviation < 2e-3,
            "deviation {} too large",
            m.max_rel_deviation
        );
    }

    #[test]
    fn amplitude_match_is_exact_for_scaled_curves() {
        let r: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin().powi(2)).collect();
        let c: Vec<f64> = r.iter().map(|v| v / 3.7).collect();
        let m = match_curves(&r, &c).unwrap();
        assert!((m.alpha - 3.7).abs() < 1e-12);
        assert!(m.max_rel_deviation < 1e-12);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(matches!(
            match_curves(&[1.0, 2.0], &[1.0]),
            Err(CompareError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn zero_curves_are_rejected() {
        assert!(matches!(
            match_curves(&[0.0, 0.0], &[1.0, 2.0]),
            Err(CompareError::ZeroCurve)
        ));
        assert!(matches!(
            match_curves(&[1.0, 2.0], &[0.0, 0.0]),
            Err(CompareError::ZeroCurve)
        ));
    }

    #[test]
    fn ensemble_settings_are_validated() {
        let params = SpinPairParams::new(2.0, 2.0, 0.0, 0.0, 350.0).unwrap();
        let pulse = PulseSpec::new(0.1, params.larmor_a(), 0.0).unwrap();
        let grid = [0.0, 2.0, 4.0];
        let bad_range = EnsembleSettings {
            line: LineShape::flat(1.0).unwrap(),
            half_range: 0.0,
            n_points: 101,
        };
        assert!(matches!(
            oracle_ensemble_average(&params, &pulse, &grid, &bad_range),
            Err(CompareError::BadSettings(_))
        ));
        let bad_points = EnsembleSettings {
            line: LineShape::flat(1.0).unwrap(),
            half_range: 100.0,
            n_points: 2,
        };
        assert!(matches!(
            oracle_ensemble_average(&params, &pulse, &grid, &bad_points),
            Err(CompareError::BadSettings(_))
        ));
    }

    #[test]
    fn narrow_lorentzian_weights_leave_nearly_resonant_curve() {
        // A very narrow line concentrates the ensemble on resonance, so
        // the average approaches the single on-resonance curve.
        let params = SpinPairParams::new(2.0, 1.6, 0.0, 0.0, 350.0).unwrap();
        let b1 = 0.1;
        let pulse = PulseSpec::new(b1, params.larmor_a(), 0.0).unwrap();
        let grid = uniform_grid(0.0, 200.0, 4.0).unwrap();
        let w1 = nutation_rate(params.g_a, b1);
        let narrow = EnsembleSettings {
            line: LineShape::new(crate::rabi::LineForm::Lorentzian { hwhm: 0.01 * w1 }, 1.0)
                .unwrap(),
            half_range: 10.0 * w1,
            n_points: 2001,
        };
        let avg = oracle_ensemble_average(&params, &pulse, &grid, &narrow).unwrap();
        let single = crate::quantum::rabi_transient_oracle(&params, &pulse, &grid).unwrap();
        let m = match_curves(&single.q, &avg.q).unwrap();
        assert!(m.max_rel_deviation < 0.05);
        // And it must differ visibly from the flat-line average.
        let flat = oracle_ensemble_average(
            &params,
            &pulse,
            &grid,
            &EnsembleSettings {
                line: LineShape::flat(1.0).unwrap(),
                half_range: 10.0 * w1,
                n_points: 2001,
            },
        )
        .unwrap();
        let mf = match_curves(&flat.q, &avg.q).unwrap();
        assert!(mf.max_rel_deviation > 0.05);
    }
}
