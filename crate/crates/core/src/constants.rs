//! Physical constants (CODATA 2018, exact in the 2019 SI).

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts an ordinary frequency in Hz (ω/2π) to angular frequency in rad/s.
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
