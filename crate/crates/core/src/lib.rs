//! Forward simulation and inverse analysis of pulsed EDMR transient nutation
//! in weakly and strongly coupled spin-1/2 pairs.
//!
//! Unit conventions used throughout:
//! * magnetic fields in mT
//! * times in ns on acquisition grids
//! * angular frequencies in rad/us internally
//! * ordinary frequencies in MHz at every I/O boundary
//!
//! Conversions live in [`constants`]; nothing else hard-codes unit factors.

pub mod aniso;
pub mod compare;
pub mod constants;
pub mod fit;
pub mod io;
pub mod pipeline;
pub mod quad;
pub mod quantum;
pub mod rabi;
pub mod records;
pub mod spectral;
pub mod synth;

pub use constants::PhysConstants;
pub use quantum::{DensityMatrix, PulseSpec, SpinPairParams};
pub use records::{SpectrumRecord, SweepRecord, TransientRecord};
