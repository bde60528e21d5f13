//! Ring resonator containing a dispersive medium.
//!
//! Computes transmission spectra, linewidths and the resonance shift produced
//! by a change of cavity length, for media ranging from vacuum to EIT and
//! Raman-gain susceptibilities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod error;
pub mod media;
pub mod numerics;
pub mod scenario;
pub mod sensitivity;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts an ordinary frequency in MHz to angular frequency in rad/s.
pub fn mhz_to_rad(mhz: f64) -> f64 {
    std::f64::consts::TAU * mhz * 1e6
}

/// Converts an angular frequency in rad/s to ordinary frequency in MHz.
pub fn rad_to_mhz(w: f64) -> f64 {
    w / std::f64::consts::TAU / 1e6
}
