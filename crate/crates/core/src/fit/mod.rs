//! Nonlinear least squares: a small damped Gauss-Newton engine plus the peak
//! and decay models the analysis pipeline fits with it.

mod decay;
mod engine;
mod lorentz;

pub use decay::{detect_envelope_maxima, fit_exp_decay, DecayFit, MaximumPoint};
pub use engine::{solve_damped_lsq, FitOptions, FitResult};
pub use lorentz::{fit_lorentzians, LorentzianFit, PeakEstimate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("model produced an empty residual vector")]
    EmptyResiduals,
    #[error("at least one parameter is required")]
    EmptyParams,
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("normal equations are rank deficient (rank {rank} of {params})")]
    RankDeficient { rank: usize, params: usize },
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("no interior maxima found")]
    NoMaxima,
    #[error("decay fit requires strictly positive values (got {q} at tau {tau_ns} ns)")]
    NonPositiveValue { tau_ns: f64, q: f64 },
}

/// One Lorentzian resonance in peak-height form:
/// amplitude * hwhm^2 / ((x - center)^2 + hwhm^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    pub center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
}

impl LorentzianPeak {
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * self.hwhm * self.hwhm / (d * d + self.hwhm * self.hwhm)
    }
}
