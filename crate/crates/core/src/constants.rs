//! CODATA 2018 exact SI constants.

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Silicon defaults used when a config leaves the material unspecified.
pub const SILICON_DENSITY: f64 = 2329.0;
pub const SILICON_PERMITTIVITY: f64 = 12.1;
