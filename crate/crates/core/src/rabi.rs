//! Analytic transient-nutation model for disordered ensembles.
//!
//! The observable after a pulse of length tau is proportional to a
//! detuning-integrated two-level excitation profile,
//!
//! ```text
//! Delta(tau) = g GAMMA b1 Phi * Integral dx sin^2( Omega0 sqrt(1+x^2) tau / 2 ) / (1 + x^2)
//! ```
//!
//! with x the detuning in units of the on-resonance Rabi frequency
//! Omega0 = kappa * g * GAMMA_PER_G * b1. The regime factor kappa encodes how
//! the pulse drives the pair: the sin^2 argument is Omega(x) tau / 2, so the
//! observed oscillation sits exactly at Omega(x) and on resonance at Omega0.
//! The 1/(1+x^2) weight is the excitation amplitude of an off-resonance spin
//! packet; integrating a flat detuning distribution against it is what the
//! detuning-averaged density-matrix simulation does, which is the equivalence
//! [`crate::compare`] checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ns_to_us, GAMMA_PER_G};
use crate::quad::{self, Estimate, QuadError};
use crate::records::{RecordError, TransientMeta, TransientRecord};

#[derive(Debug, Error, PartialEq)]
pub enum RabiError {
    #[error("kappa must be positive and finite (got {0})")]
    InvalidKappa(f64),
    #[error("pulse length must be non-negative (got {0} ns)")]
    NegativeTau(f64),
    #[error("amplitude must be non-negative and width positive")]
    InvalidLineShape,
    #[error("{0}")]
    InvalidSettings(String),
    #[error("quadrature did not reach tolerance; best estimate {:.6e} +/- {:.2e}", best.value, best.error)]
    Quadrature { best: Estimate },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// How the pulse couples to the pair, i.e. which effective nutation factor
/// kappa applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingRegime {
    /// Larmor separation far above J, Dd and the drive: one spin at a time,
    /// plain s=1/2 nutation, kappa = 1/2.
    WeakSelective,
    /// Coupling far above the Larmor separation, both transitions driven:
    /// triplet nutation, kappa = 1.
    StrongUnselective,
    /// Strong coupling but B1 below the level splitting, single transition of
    /// the triplet: kappa = 1/sqrt(2).
    StrongSmallB1,
}

impl CouplingRegime {
    pub fn kappa(&self) -> f64 {
        match self {
            CouplingRegime::WeakSelective => 0.5,
            CouplingRegime::StrongUnselective => 1.0,
            CouplingRegime::StrongSmallB1 => 1.0 / 2f64.sqrt(),
        }
    }
}

/// Spectral density of pair resonances around the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineForm {
    Flat,
    /// Lorentzian with HWHM in rad/us.
    Lorentzian { hwhm: f64 },
    /// Gaussian with standard deviation in rad/us.
    Gaussian { sigma: f64 },
}

/// Line amplitude Phi: a scalar strength at the carrier plus a peak-normalised
/// profile. The profile only matters when weighting detuning ensembles; the
/// analytic model itself uses the carrier amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineShape {
    pub form: LineForm,
    pub amplitude: f64,
}

impl LineShape {
    pub fn new(form: LineForm, amplitude: f64) -> Result<Self, RabiError> {
        let width_ok = match form {
            LineForm::Flat => true,
            LineForm::Lorentzian { hwhm } => hwhm > 0.0 && hwhm.is_finite(),
            LineForm::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
        };
        if !width_ok || !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(RabiError::InvalidLineShape);
        }
        Ok(Self { form, amplitude })
    }

    pub fn flat(amplitude: f64) -> Result<Self, RabiError> {
        Self::new(LineForm::Flat, amplitude)
    }

    /// Profile value at a detuning from the line centre (rad/us), peak = 1.
    pub fn profile(&self, detuning: f64) -> f64 {
        match self.form {
            LineForm::Flat => 1.0,
            LineForm::Lorentzian { hwhm } => hwhm * hwhm / (detuning * detuning + hwhm * hwhm),
            LineForm::Gaussian { sigma } => (-0.5 * (detuning / sigma).powi(2)).exp(),
        }
    }

    /// Amplitude times profile.
    pub fn eval(&self, detuning: f64) -> f64 {
        self.amplitude * self.profile(detuning)
    }
}

/// Controls for the detuning integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Cutoff X of the reduced-detuning integral; the |x| > X tail is bounded
    /// analytically. Must be >= 10.
    pub truncation: f64,
    /// Absolute tolerance on the normalised integral.
    pub abs_tol: f64,
    /// Relative tolerance; must be <= 1e-6.
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            truncation: 50.0,
            abs_tol: 1e-8,
            rel_tol: 1e-9,
            max_intervals: 4000,
        }
    }
}

impl QuadratureSettings {
    fn validate(&self) -> Result<(), RabiError> {
        if !(self.truncation >= 10.0) {
            return Err(RabiError::InvalidSettings(format!(
                "truncation must be >= 10 (got {})",
                self.truncation
            )));
        }
        if !(self.rel_tol <= 1e-6) || !(self.rel_tol >= 0.0) {
            return Err(RabiError::InvalidSettings(format!(
                "relative tolerance must be in [0, 1e-6] (got {})",
                self.rel_tol
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(RabiError::InvalidSettings(format!(
                "absolute tolerance must be positive (got {})",
                self.abs_tol
            )));
        }
        Ok(())
    }

    /// Exact bound on the neglected |x| > X tail: the integrand is at most
    /// 1/(1+x^2), so the tail is at most 2 (pi/2 - arctan X).
    pub fn tail_bound(&self) -> f64 {
        2.0 * (std::f64::consts::FRAC_PI_2 - self.truncation.atan())
    }
}

/// Predicted oscillation frequency at a given detuning (all rad/us):
/// Omega = sqrt( (kappa g GAMMA b1)^2 + detuning^2 ).
pub fn rabi_frequency(kappa: f64, b1_mt: f64, g: f64, detuning: f64) -> f64 {
    let w0 = kappa * g * GAMMA_PER_G * b1_mt;
    (w0 * w0 + detuning * detuning).sqrt()
}

/// Ensemble-integrated observable at one pulse length, with its quadrature
/// truncation error estimate.
pub fn delta_analytic(
    tau_ns: f64,
    b1_mt: f64,
    g: f64,
    kappa: f64,
    line: &LineShape,
    settings: &QuadratureSettings,
) -> Result<Estimate, RabiError> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(RabiError::InvalidKappa(kappa));
    }
    if !(tau_ns >= 0.0) {
        return Err(RabiError::NegativeTau(tau_ns));
    }
    settings.validate()?;

    let omega0 = rabi_frequency(kappa, b1_mt, g, 0.0);
    let half_angle = 0.5 * omega0 * ns_to_us(tau_ns);
    let integrand = move |x: f64| {
        let s = (half_angle * (1.0 + x * x).sqrt()).sin();
        s * s / (1.0 + x * x)
    };
    // The integrand is even: integrate [0, X] and double.
    let half = quad::integrate(
        integrand,
        0.0,
        settings.truncation,
        0.5 * settings.abs_tol,
        settings.rel_tol,
        settings.max_intervals,
    );
    let prefactor = g * GAMMA_PER_G * b1_mt * line.amplitude;
    match half {
        Ok(est) => Ok(Estimate {
            value: prefactor * 2.0 * est.value,
            error: prefactor * (2.0 * est.error + settings.tail_bound()),
        }),
        Err(QuadError::ToleranceNotReached { value, error, .. }) => Err(RabiError::Quadrature {
            best: Estimate {
                value: prefactor * 2.0 * value,
                error: prefactor * (2.0 * error + settings.tail_bound()),
            },
        }),
        Err(QuadError::BadBounds) => Err(RabiError::InvalidSettings(
            "quadrature bounds degenerate".to_string(),
        )),
    }
}

/// Analytic nutation transient on a tau grid with unit line amplitude and
/// default quadrature settings.
pub fn nutation_curve(
    regime: CouplingRegime,
    b1_mt: f64,
    g: f64,
    tau_grid_ns: &[f64],
) -> Result<TransientRecord, RabiError> {
    let line = LineShape::flat(1.0)?;
    let settings = QuadratureSettings::default();
    let q = tau_grid_ns
        .iter()
        .map(|&tau| delta_analytic(tau, b1_mt, g, regime.kappa(), &line, &settings).map(|e| e.value))
        .collect::<Result<Vec<_>, _>>()?;
    let meta = TransientMeta {
        b1_label: "analytic".to_string(),
        b1_scale: Some(1.0),
        seed: None,
        noise_sigma: 0.0,
        n_shots: 1,
        components: Vec::new(),
    };
    Ok(TransientRecord::new(tau_grid_ns.to_vec(), q, meta)?)
}
