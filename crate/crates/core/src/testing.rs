//! Shared fixtures for unit tests.

use crate::params::{CavityConfig, ModeVolume, ParticleSpec, RateConvention, System};
use crate::Vec3;

pub(crate) fn cavity() -> CavityConfig {
    CavityConfig {
        wavelength: 1.56e-6,
        linewidth: 0.78e6,
        detuning: -1.2 * 0.78e6,
        pump_power: 10e-3,
        waist: 5e-6,
        mode_volume: ModeVolume::CouplingRatio(1.1),
        rate_convention: RateConvention::Angular,
    }
}

pub(crate) fn rod() -> System {
    System::new(ParticleSpec::rod(800e-9, 25e-9, 2329.0, 12.1).unwrap(), cavity()).unwrap()
}

pub(crate) fn disk() -> System {
    let r = rod();
    r.with_particle(ParticleSpec::disk(20e-9, 300e-9, 2329.0, 12.1).unwrap()).unwrap()
}

pub(crate) fn sphere() -> System {
    let r = rod();
    r.with_particle(r.particle.equivalent_sphere().unwrap()).unwrap()
}

/// Deterministic pseudo-random points for property loops.
pub(crate) struct Points(u64);

impl Points {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub(crate) fn unit(&mut self) -> Vec3 {
        let z = 2.0 * self.uniform() - 1.0;
        let phi = 2.0 * std::f64::consts::PI * self.uniform();
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    }

    /// Position within a waist and a few wavelengths along the axis.
    pub(crate) fn position(&mut self, w0: f64, lambda: f64) -> Vec3 {
        Vec3::new(
            (self.uniform() - 0.5) * w0,
            (self.uniform() - 0.5) * w0,
            (self.uniform() - 0.5) * 3.0 * lambda,
        )
    }
}
