//! Physical constants and unit conversion. Everything inside the crate is SI
//! with angular frequencies; Hz only appears at the configuration and report
//! boundaries.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const C_LIGHT: f64 = 299_792_458.0;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

#[inline]
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Bose-Einstein occupancy at angular frequency `omega` and temperature `t`.
pub fn bose_occupancy(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega.abs() / (K_B * t)).exp_m1()
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
