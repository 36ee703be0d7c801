//! Field-particle coupling: the optical potential and its gradients, the
//! Rayleigh scattering amplitudes, and detector intensities.
//!
//! Conventions: the cavity axis is `e_z`, the mode is polarized along `e_x`
//! and the standing wave is `f(r) cos(kz)` with the amplitude envelope
//! `f(r) = exp(-(x² + y²)/w0²)`. Curvature and Gouy phase are neglected.
//! Orientation gradients are taken with respect to the components of `m`
//! and projected onto the tangent plane of the unit sphere.

pub mod quadrature;
pub mod scattering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::params::System;
use crate::rotor::{shape, shape_gradient};
use crate::Vec3;

pub use quadrature::{GaussLegendre, SphereQuadrature, DEFAULT_QUADRATURE_DEGREE};
pub use scattering::{ScatteringKernel, ScatteringSums};

/// `sqrt(3/8)`, the amplitude normalisation that pairs with `γ0`.
pub(crate) const AMPLITUDE_NORM: f64 = 0.612_372_435_695_794_5;

/// Transverse Gaussian envelope with amplitude waist `w0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFunction {
    pub waist: f64,
    pub wavenumber: f64,
}

impl ModeFunction {
    pub fn of(system: &System) -> Self {
        Self {
            waist: system.waist(),
            wavenumber: system.k(),
        }
    }

    pub fn envelope(&self, r: &Vec3) -> f64 {
        (-(r.x * r.x + r.y * r.y) / (self.waist * self.waist)).exp()
    }

    /// Gradient of `f` (not `f²`).
    pub fn envelope_gradient(&self, r: &Vec3) -> Vec3 {
        let f = self.envelope(r);
        let s = -2.0 * f / (self.waist * self.waist);
        Vec3::new(s * r.x, s * r.y, 0.0)
    }
}

/// Force and torque acting on the centre of mass and on `L`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedForce {
    /// Newtons.
    pub force: Vec3,
    /// N m, perpendicular to `m`.
    pub torque: Vec3,
}

impl std::ops::Add for GeneralizedForce {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

/// Dimensionless potential `v` with its gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialGradient {
    pub value: f64,
    /// `∂v/∂r` in 1/m.
    pub grad_r: Vec3,
    /// Tangential gradient `(1 - m mᵀ) ∂v/∂m`.
    pub grad_m: Vec3,
}

/// Direction of the internal polarization, `(χ_perp e_x + Δχ (m·e_x) m)/χ_m`.
pub fn polarization_vector(system: &System, m: &Vec3) -> Vec3 {
    let rel = &system.relative;
    Vec3::x() * rel.perpendicular + m * (rel.anisotropy * m.x)
}

/// `v = V / (ħ U0 |b|²)`. Lies in `[0, 1]` for rods and disks.
pub fn dimensionless_potential(system: &System, r: &Vec3, m: &Vec3) -> f64 {
    let mode = ModeFunction::of(system);
    let f = mode.envelope(r);
    let bracket = polarization_vector(system, m).x;
    let s = shape(system.kind(), system.size, m, &Vec3::z());
    f * f * bracket * (0.5 + 0.5 * (2.0 * system.k() * r.z).cos() * s)
}

pub fn potential_with_gradient(system: &System, r: &Vec3, m: &Vec3) -> PotentialGradient {
    let k = system.k();
    let w0 = system.waist();
    let rel = &system.relative;
    let f2 = (-2.0 * (r.x * r.x + r.y * r.y) / (w0 * w0)).exp();
    let bracket = rel.perpendicular + rel.anisotropy * m.x * m.x;
    let (s2, c2) = (2.0 * k * r.z).sin_cos();
    let s = shape(system.kind(), system.size, m, &Vec3::z());
    let standing = 0.5 + 0.5 * c2 * s;
    let value = f2 * bracket * standing;

    let transverse = -4.0 / (w0 * w0);
    let grad_r = Vec3::new(
        transverse * r.x * value,
        transverse * r.y * value,
        -f2 * bracket * k * s2 * s,
    );
    let ds = shape_gradient(system.kind(), system.size, m, &Vec3::z());
    let free = (Vec3::x() * (2.0 * rel.anisotropy * m.x * standing) + ds * (0.5 * c2 * bracket)) * f2;
    let grad_m = free - m * m.dot(&free);
    PotentialGradient {
        value,
        grad_r,
        grad_m,
    }
}

/// Optical potential `V = ħ U0 |b|² v` in joules.
pub fn potential(system: &System, r: &Vec3, m: &Vec3, photons: f64) -> f64 {
    system.hbar_u0() * photons * dimensionless_potential(system, r, m)
}

/// `-∂_r V` and the torque `-m × ∂_m V` for intracavity photon number `photons`.
pub fn conservative_force(system: &System, r: &Vec3, m: &Vec3, photons: f64) -> GeneralizedForce {
    let g = potential_with_gradient(system, r, m);
    let scale = -system.hbar_u0() * photons;
    GeneralizedForce {
        force: g.grad_r * scale,
        torque: m.cross(&g.grad_m) * scale,
    }
}

/// Polarization pair `(θ̂, φ̂)` for the scattering direction `n`.
///
/// At the poles the `φ = 0` limit is used, so `n = e_z` gives `(e_x, e_y)`
/// and `n = -e_z` gives `(-e_x, e_y)`; `ε₁ × ε₂ = n` always holds.
pub fn polarization_basis(n: &Vec3) -> (Vec3, Vec3) {
    let rho = (n.x * n.x + n.y * n.y).sqrt();
    let (cp, sp) = if rho < 1e-300 { (1.0, 0.0) } else { (n.x / rho, n.y / rho) };
    let ct = n.z;
    (Vec3::new(ct * cp, ct * sp, -rho), Vec3::new(-sp, cp, 0.0))
}

/// Scattering amplitude and its derivatives for one polarization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeDerivatives {
    pub value: Complex64,
    /// `∂A/∂r` (1/m).
    pub grad_r: [Complex64; 3],
    /// Tangential `∂A/∂m`.
    pub grad_m: [Complex64; 3],
}

impl AmplitudeDerivatives {
    /// Derivative along an orientation tangent, e.g. `∂m/∂α`.
    pub fn along_m(&self, t: &Vec3) -> Complex64 {
        self.grad_m[0] * t.x + self.grad_m[1] * t.y + self.grad_m[2] * t.z
    }
}

/// Rayleigh amplitude for scattering into direction `n` with polarization `eps`.
pub fn amplitude_for(system: &System, n: &Vec3, eps: &Vec3, r: &Vec3, m: &Vec3) -> Complex64 {
    amplitude_with_derivatives(system, n, eps, r, m).value
}

/// Amplitude for polarization index `s ∈ {1, 2}` of [`polarization_basis`].
pub fn scattering_amplitude(system: &System, n: &Vec3, s: usize, r: &Vec3, m: &Vec3) -> Complex64 {
    let (e1, e2) = polarization_basis(n);
    let eps = if s == 1 { e1 } else { e2 };
    amplitude_for(system, n, &eps, r, m)
}

pub fn amplitude_with_derivatives(
    system: &System,
    n: &Vec3,
    eps: &Vec3,
    r: &Vec3,
    m: &Vec3,
) -> AmplitudeDerivatives {
    let k = system.k();
    let kind = system.kind();
    let size = system.size;
    let rel = &system.relative;
    let mode = ModeFunction::of(system);
    let f = mode.envelope(r);
    let df = mode.envelope_gradient(r);

    let pol = polarization_vector(system, m);
    let proj = eps.dot(&pol);
    let q1 = (Vec3::z() - n) * 0.5;
    let q2 = (Vec3::z() + n) * 0.5;
    let s1 = shape(kind, size, m, &q1);
    let s2 = shape(kind, size, m, &q2);
    let ph_plus = Complex64::from_polar(1.0, k * r.z);
    let ph_minus = ph_plus.conj();
    let w = ph_plus * s1 + ph_minus * s2;
    let carrier = Complex64::from_polar(AMPLITUDE_NORM, -k * n.dot(r));
    let value = carrier * (f * proj) * w;

    let i = Complex64::i();
    let dw_dz = i * k * (ph_plus * s1 - ph_minus * s2);
    let mut grad_r = [Complex64::new(0.0, 0.0); 3];
    for (c, slot) in grad_r.iter_mut().enumerate() {
        *slot = carrier * proj * df[c] * w - i * k * n[c] * value;
    }
    grad_r[2] += carrier * (f * proj) * dw_dz;

    let dproj = (Vec3::x() * eps.dot(m) + eps * m.x) * rel.anisotropy;
    let g1 = shape_gradient(kind, size, m, &q1);
    let g2 = shape_gradient(kind, size, m, &q2);
    let mut grad_m = [Complex64::new(0.0, 0.0); 3];
    for (c, slot) in grad_m.iter_mut().enumerate() {
        *slot = carrier * f * (w * dproj[c] + (ph_plus * g1[c] + ph_minus * g2[c]) * proj);
    }
    let radial = grad_m[0] * m.x + grad_m[1] * m.y + grad_m[2] * m.z;
    for c in 0..3 {
        grad_m[c] -= radial * m[c];
    }
    AmplitudeDerivatives {
        value,
        grad_r,
        grad_m,
    }
}

/// Far-field intensity at `R n`, total and split over `(θ̂, φ̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorReading {
    /// W/m².
    pub total: f64,
    pub polarized: [f64; 2],
    /// Set when `R < 100 λ`, where the far-field form is questionable.
    pub near_field_warning: bool,
}

pub fn detector_intensity(
    system: &System,
    n: &Vec3,
    distance: f64,
    r: &Vec3,
    m: &Vec3,
    photons: f64,
) -> Result<DetectorReading> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::invalid(
            "distance",
            format!("detector distance must be positive, got {distance}"),
        ));
    }
    let n = n.normalize();
    let c = &system.coupling;
    let prefactor = HBAR * c.pump_frequency * c.gamma0 * photons
        / (4.0 * std::f64::consts::PI * distance * distance);
    let (e1, e2) = polarization_basis(&n);
    let i1 = prefactor * amplitude_for(system, &n, &e1, r, m).norm_sqr();
    let i2 = prefactor * amplitude_for(system, &n, &e2, r, m).norm_sqr();
    Ok(DetectorReading {
        total: i1 + i2,
        polarized: [i1, i2],
        near_field_warning: distance < 100.0 * system.cavity.wavelength,
    })
}

#[cfg(test)]
mod tests;
