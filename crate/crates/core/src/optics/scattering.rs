//! Angular sums over Rayleigh scattering: total rate, radiation-pressure
//! force and torque.
//!
//! Summed over both polarizations, `Σ_s |ε_s·P|² = |P|² - (n·P)²`, and the
//! real factor `ε_s·P` drops out of `Im(A* ∂A)`. The kernels below work with
//! this reduced form, so no polarization basis is needed.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{ParticleKind, System};
use crate::rotor::{shape, shape_gradient};
use crate::special::sinc_pair;
use crate::Vec3;

use super::quadrature::{GaussLegendre, SphereQuadrature};
use super::{polarization_vector, GeneralizedForce};

/// Dimensionless angular sums at one configuration.
///
/// * `rate`: `Σ_s ∫ d²n/4π |A|²`, so that `γ_sc = γ0 · rate`.
/// * `force`: `Σ_s ∫ d²n/4π Im(A* ∂_r A)` in 1/m.
/// * `torque`: `Σ_s ∫ d²n/4π m × Im(A* ∂_m A)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSums {
    pub rate: f64,
    pub force: Vec3,
    pub torque: Vec3,
}

impl ScatteringSums {
    /// `γ_sc` in 1/s.
    pub fn gamma_sc(&self, system: &System) -> f64 {
        system.coupling.gamma0 * self.rate
    }

    /// Radiation-pressure force and torque for intracavity photon number `photons`.
    pub fn radiation_pressure(&self, system: &System, photons: f64) -> GeneralizedForce {
        let scale = crate::constants::HBAR * system.coupling.gamma0 * photons;
        GeneralizedForce {
            force: self.force * scale,
            torque: self.torque * scale,
        }
    }
}

/// Azimuthally reduced rule for rods: Gauss–Legendre in `u = m·n` with the
/// integral around `m` done in closed form.
#[derive(Clone, Debug)]
pub struct AxialRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    half_sin: Vec<f64>,
    half_cos: Vec<f64>,
    size: f64,
}

impl AxialRule {
    /// Node count grows with `kℓ` so that the sinc products stay resolved.
    pub fn new(size: f64) -> Self {
        let n = 24 + 2 * size.ceil().max(0.0) as usize;
        let gl = GaussLegendre::new(n);
        let (half_sin, half_cos) = gl.nodes.iter().map(|&u| (0.5 * size * u).sin_cos()).unzip();
        Self {
            nodes: gl.nodes,
            weights: gl.weights,
            half_sin,
            half_cos,
            size,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Evaluation strategy for the angular sums.
#[derive(Clone, Debug)]
pub enum ScatteringKernel {
    /// Closed form for isotropic point particles.
    Isotropic,
    /// 1D rule for rods.
    Axial(AxialRule),
    /// Full product rule on the sphere, any particle kind.
    Product(SphereQuadrature),
}

impl ScatteringKernel {
    /// Fastest exact kernel for the particle: closed form for spheres, axial
    /// rule for rods, product rule of the given degree for disks.
    pub fn for_system(system: &System, degree: usize) -> Result<Self> {
        Ok(match system.kind() {
            ParticleKind::Sphere => Self::Isotropic,
            ParticleKind::Rod => Self::Axial(AxialRule::new(system.size)),
            ParticleKind::Disk => Self::Product(SphereQuadrature::new(degree)?),
        })
    }

    pub fn product(degree: usize) -> Result<Self> {
        Ok(Self::Product(SphereQuadrature::new(degree)?))
    }

    /// Angular sums at `(r, m)`. With `pressure == false` only `rate` is filled.
    pub fn evaluate(&self, system: &System, r: &Vec3, m: &Vec3, pressure: bool) -> ScatteringSums {
        match self {
            Self::Isotropic => isotropic(system, r),
            Self::Axial(rule) => axial(rule, system, r, m, pressure),
            Self::Product(q) => product(q, system, r, m, pressure),
        }
    }
}

fn envelope_squared(system: &System, r: &Vec3) -> f64 {
    let w0 = system.waist();
    (-2.0 * (r.x * r.x + r.y * r.y) / (w0 * w0)).exp()
}

fn isotropic(system: &System, r: &Vec3) -> ScatteringSums {
    let c = system.relative.perpendicular;
    let cz = (system.k() * r.z).cos();
    ScatteringSums {
        rate: envelope_squared(system, r) * c * c * cz * cz,
        ..Default::default()
    }
}

fn product(q: &SphereQuadrature, system: &System, r: &Vec3, m: &Vec3, pressure: bool) -> ScatteringSums {
    let kind = system.kind();
    let size = system.size;
    let k = system.k();
    let p = polarization_vector(system, m);
    let p2 = p.norm_squared();
    let (s2kz, c2kz) = (2.0 * k * r.z).sin_cos();

    let mut rate = 0.0;
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for node in &q.nodes {
        let n = node.n;
        let np = n.dot(&p);
        let q2 = node.weight * (p2 - np * np);
        let q1v = (Vec3::z() - n) * 0.5;
        let q2v = (Vec3::z() + n) * 0.5;
        let s1 = shape(kind, size, m, &q1v);
        let s2 = shape(kind, size, m, &q2v);
        let total = s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * c2kz;
        rate += q2 * total;
        if pressure {
            force += (Vec3::z() * (s1 * s1 - s2 * s2) - n * total) * q2;
            if kind != ParticleKind::Sphere {
                let g1 = shape_gradient(kind, size, m, &q1v);
                let g2 = shape_gradient(kind, size, m, &q2v);
                torque += (g1 * s2 - g2 * s1) * q2;
            }
        }
    }
    finish(system, r, m, rate, force * k, torque * s2kz)
}

fn axial(rule: &AxialRule, system: &System, r: &Vec3, m: &Vec3, pressure: bool) -> ScatteringSums {
    let k = system.k();
    let kl = rule.size;
    let p = polarization_vector(system, m);
    let p2 = p.norm_squared();
    let pm = m.dot(&p);
    let p_perp = p - m * pm;
    let perp2 = 0.5 * p_perp.norm_squared();
    let (s2kz, c2kz) = (2.0 * k * r.z).sin_cos();
    let a = 0.5 * kl * m.z;
    let (sa, ca) = a.sin_cos();

    let mut rate = 0.0;
    // ⟨Q² n⟩ = u⟨Q²⟩ m - u(1-u²) p_m P⊥, accumulated as the m and P⊥ coefficients
    let mut force_m = 0.0;
    let mut force_perp = 0.0;
    let mut force_z = 0.0;
    let mut torque_z = 0.0;
    let mut torque_m = 0.0;
    let mut torque_perp = 0.0;
    for i in 0..rule.nodes.len() {
        let u = rule.nodes[i];
        let w = 0.5 * rule.weights[i];
        let one_minus = 1.0 - u * u;
        let q2 = p2 - u * u * pm * pm - one_minus * perp2;
        let (sb, cb) = (rule.half_sin[i], rule.half_cos[i]);
        let (s1, d1) = sinc_pair(a - 0.5 * kl * u, sa * cb - ca * sb, ca * cb + sa * sb);
        let (s2, d2) = sinc_pair(a + 0.5 * kl * u, sa * cb + ca * sb, ca * cb - sa * sb);
        let total = s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * c2kz;
        rate += w * q2 * total;
        if pressure {
            let qn_m = u * q2;
            let qn_perp = -u * one_minus * pm;
            force_m -= w * total * qn_m;
            force_perp -= w * total * qn_perp;
            force_z += w * q2 * (s1 * s1 - s2 * s2);
            let along_z = s2 * d1 - s1 * d2;
            let along_n = s2 * d1 + s1 * d2;
            torque_z += w * along_z * q2;
            torque_m -= w * along_n * qn_m;
            torque_perp -= w * along_n * qn_perp;
        }
    }
    let force = (m * force_m + p_perp * force_perp + Vec3::z() * force_z) * k;
    let torque = (Vec3::z() * torque_z + m * torque_m + p_perp * torque_perp) * (0.5 * kl * s2kz);
    finish(system, r, m, rate, force, torque)
}

fn finish(system: &System, r: &Vec3, m: &Vec3, rate: f64, force: Vec3, torque_free: Vec3) -> ScatteringSums {
    let scale = 0.375 * envelope_squared(system, r);
    ScatteringSums {
        rate: scale * rate,
        force: force * scale,
        torque: m.cross(&torque_free) * scale,
    }
}

/// `γ_sc` with a convergence check between product rules of degree `d - 1` and `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// 1/s.
    pub gamma_sc: f64,
    pub relative_change: f64,
    pub converged: bool,
}

pub const RATE_CONVERGENCE_TOLERANCE: f64 = 1e-8;

pub fn scattering_rate(system: &System, r: &Vec3, m: &Vec3, degree: usize) -> Result<RateEstimate> {
    if degree < 20 {
        return Err(crate::error::Error::QuadratureDegree(degree));
    }
    let lo = ScatteringKernel::product(degree - 1)?.evaluate(system, r, m, false).rate;
    let hi = ScatteringKernel::product(degree)?.evaluate(system, r, m, false).rate;
    let relative_change = if hi == 0.0 { (hi - lo).abs() } else { ((hi - lo) / hi).abs() };
    Ok(RateEstimate {
        gamma_sc: system.coupling.gamma0 * hi,
        relative_change,
        converged: relative_change <= RATE_CONVERGENCE_TOLERANCE || (hi - lo).abs() < 1e-300,
    })
}

/// Radiation-pressure force and torque from a product rule of the given degree.
pub fn radiation_pressure(
    system: &System,
    r: &Vec3,
    m: &Vec3,
    photons: f64,
    degree: usize,
) -> Result<GeneralizedForce> {
    let sums = ScatteringKernel::product(degree)?.evaluate(system, r, m, true);
    Ok(sums.radiation_pressure(system, photons))
}
