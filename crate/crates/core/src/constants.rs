//! Physical constants and unit conversions.
//!
//! All frequency/field arithmetic in the crate funnels through this module so
//! the unit system stays coherent: fields in mT, times in ns, angular
//! frequencies in rad/us, ordinary frequencies in MHz.

use std::f64::consts::TAU;

/// Bundle of the raw constants the gyromagnetic conversion is derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    /// Reduced Planck constant, J*s.
    pub hbar: f64,
}

/// CODATA 2018 values.
pub const CODATA: PhysConstants = PhysConstants {
    mu_b: 9.274_010_078_3e-24,
    hbar: 1.054_571_817e-34,
};

impl PhysConstants {
    /// Gyromagnetic conversion per unit g-factor, rad us^-1 mT^-1.
    ///
    /// mu_B/hbar is 8.794e10 rad s^-1 T^-1; the 1e-9 factor rescales to the
    /// crate's us/mT units.
    pub fn gamma_per_g(&self) -> f64 {
        self.mu_b / self.hbar * 1e-9
    }
}

/// Gyromagnetic conversion per unit g-factor, rad us^-1 mT^-1 (~87.94).
pub const GAMMA_PER_G: f64 = 87.941_000_59;

/// Ordinary-frequency form of [`GAMMA_PER_G`], MHz/mT per unit g (~13.996).
pub const MHZ_PER_MT_PER_G: f64 = GAMMA_PER_G / TAU;

/// rad/us -> MHz.
pub fn rad_per_us_to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// MHz -> rad/us.
pub fn mhz_to_rad_per_us(freq: f64) -> f64 {
    freq * TAU
}

/// ns -> us.
pub fn ns_to_us(t: f64) -> f64 {
    t * 1e-3
}
