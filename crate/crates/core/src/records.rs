//! Sampled-curve containers shared by the synthesis and analysis stages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::OscComponent;

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("grid and value arrays differ in length ({grid} vs {values})")]
    LengthMismatch { grid: usize, values: usize },
    #[error("grid must be strictly increasing (violated at index {index})")]
    NonMonotonicGrid { index: usize },
    #[error("record must contain at least {min} points, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("grid is not uniformly spaced")]
    NonUniformGrid,
}

fn check_grid(grid: &[f64], values: &[f64], min_len: usize) -> Result<(), RecordError> {
    if grid.len() != values.len() {
        return Err(RecordError::LengthMismatch {
            grid: grid.len(),
            values: values.len(),
        });
    }
    if grid.len() < min_len {
        return Err(RecordError::TooShort {
            min: min_len,
            got: grid.len(),
        });
    }
    for (i, v) in grid.iter().chain(values.iter()).enumerate() {
        if !v.is_finite() {
            return Err(RecordError::NonFinite { index: i % grid.len() });
        }
    }
    for i in 1..grid.len() {
        if grid[i] <= grid[i - 1] {
            return Err(RecordError::NonMonotonicGrid { index: i });
        }
    }
    Ok(())
}

/// Provenance attached to a transient: which B1 level it belongs to and how
/// (or whether) noise was generated.
/// A scalar with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub sigma: f64,
}

impl Measurement {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransientMeta {
    pub b1_label: String,
    /// Relative B1 scale of this level when known (1.0 = reference level).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub noise_sigma: f64,
    pub n_shots: u32,
    /// Ground-truth oscillation components for synthetic records.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<OscComponent>,
}

/// Sampled charge transient Q(tau): accumulated charge (arbitrary units)
/// versus pulse length tau (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientRecord {
    pub tau_ns: Vec<f64>,
    pub q: Vec<f64>,
    pub meta: TransientMeta,
}

impl TransientRecord {
    pub fn new(tau_ns: Vec<f64>, q: Vec<f64>, meta: TransientMeta) -> Result<Self, RecordError> {
        check_grid(&tau_ns, &q, 2)?;
        Ok(Self { tau_ns, q, meta })
    }

    pub fn len(&self) -> usize {
        self.tau_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_ns.is_empty()
    }

    /// Grid step when uniform (relative tolerance 1e-9), else None.
    pub fn uniform_step_ns(&self) -> Option<f64> {
        let n = self.tau_ns.len();
        if n < 2 {
            return None;
        }
        let step = (self.tau_ns[n - 1] - self.tau_ns[0]) / (n - 1) as f64;
        let tol = 1e-9 * step.abs().max(1e-300);
        for i in 1..n {
            if ((self.tau_ns[i] - self.tau_ns[i - 1]) - step).abs() > tol {
                return None;
            }
        }
        Some(step)
    }
}

/// Sampled field sweep Q(B0) at fixed pulse settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub b0_mt: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub noise_sigma: f64,
    /// Sample orientation this sweep was taken at, degrees from the
    /// surface normal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    /// Carrier frequency of the pulse, MHz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_mhz: Option<f64>,
}

impl SweepRecord {
    pub fn new(
        b0_mt: Vec<f64>,
        q: Vec<f64>,
        seed: Option<u64>,
        noise_sigma: f64,
    ) -> Result<Self, RecordError> {
        check_grid(&b0_mt, &q, 2)?;
        Ok(Self {
            b0_mt,
            q,
            seed,
            noise_sigma,
            angle_deg: None,
            carrier_mhz: None,
        })
    }
}

/// Unit carried by the abscissa of a [`SpectrumRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumAxis {
    FrequencyMhz,
    FieldMt,
}

/// A generic peaked curve: FFT magnitude versus frequency, or Q versus field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub axis: SpectrumAxis,
}

impl SpectrumRecord {
    pub fn new(x: Vec<f64>, y: Vec<f64>, axis: SpectrumAxis) -> Result<Self, RecordError> {
        check_grid(&x, &y, 2)?;
        Ok(Self { x, y, axis })
    }

    pub fn from_sweep(sweep: &SweepRecord) -> Self {
        Self {
            x: sweep.b0_mt.clone(),
            y: sweep.q.clone(),
            axis: SpectrumAxis::FieldMt,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}
