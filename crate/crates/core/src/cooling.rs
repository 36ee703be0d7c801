//! Cooling diagnostics: phase-space contraction rate, harmonic trap
//! frequencies at the potential minimum, the self-consistent cavity
//! amplitude there and the recoil-limited temperatures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{Error, Result};
use crate::optics::{amplitude_with_derivatives, potential_with_gradient, ScatteringKernel, SphereQuadrature};
use crate::params::{ParticleKind, System};
use crate::rotor::euler_tangents;
use crate::Vec3;

/// `4ħκη²U0²δ / (κ² + δ²)³` with `δ = Δ - U0 v`.
fn gamma_prefactor(system: &System, v: f64) -> f64 {
    let c = &system.coupling;
    let delta = c.delta - c.u0 * v;
    let denom = c.kappa * c.kappa + delta * delta;
    4.0 * HBAR * c.kappa * c.eta * c.eta * c.u0 * c.u0 * delta / (denom * denom * denom)
}

/// Phase-space contraction rate at `(r, m)`; negative values mean cooling.
///
/// Orientation enters through the tangential gradient of `v`, which equals
/// the Euler-angle form `(∂_α v)²/sin²β + (∂_β v)²` away from the poles.
pub fn gamma_rate(system: &System, r: &Vec3, m: &Vec3) -> f64 {
    let g = potential_with_gradient(system, r, m);
    let rotational = if system.kind().is_anisotropic() {
        g.grad_m.norm_squared() / system.inertia
    } else {
        0.0
    };
    gamma_prefactor(system, g.value) * (g.grad_r.norm_squared() / system.mass + rotational)
}

/// [`gamma_rate`] written in Euler angles. Requires `sin β` away from zero.
pub fn gamma_rate_euler(system: &System, r: &Vec3, alpha: f64, beta: f64) -> Result<f64> {
    let sb = beta.sin();
    if sb.abs() < 1e-6 {
        return Err(Error::invalid("beta", "Euler chart is singular at the poles; use gamma_rate"));
    }
    let m = crate::rotor::m_from_euler(alpha, beta);
    let g = potential_with_gradient(system, r, &m);
    let (ta, tb) = euler_tangents(alpha, beta);
    let d_alpha = g.grad_m.dot(&ta);
    let d_beta = g.grad_m.dot(&tb);
    let rotational = if system.kind().is_anisotropic() {
        (d_alpha * d_alpha / (sb * sb) + d_beta * d_beta) / system.inertia
    } else {
        0.0
    };
    Ok(gamma_prefactor(system, g.value) * (g.grad_r.norm_squared() / system.mass + rotational))
}

/// Magnitude against which [`gamma_rate`] is compared when testing zeros.
pub fn gamma_scale(system: &System) -> f64 {
    let c = &system.coupling;
    let delta = c.delta.abs() + c.u0.abs();
    let denom = c.kappa * c.kappa;
    4.0 * HBAR * c.kappa * c.eta * c.eta * c.u0 * c.u0 * delta / (denom * denom * denom)
        * (system.k() * system.k() / system.mass + 1.0 / system.inertia)
}

/// Potential minimum: rods along the polarization, disks with their face
/// normal along the cavity axis, at the central antinode.
pub fn equilibrium(system: &System) -> (Vec3, Vec3) {
    let m = match system.kind() {
        ParticleKind::Disk => Vec3::z(),
        _ => Vec3::x(),
    };
    (Vec3::zeros(), m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub b0: Complex64,
    pub photons: f64,
    /// `γ_sc` at the minimum, 1/s.
    pub gamma_sc0: f64,
    pub kappa_eff: f64,
    /// `v` at the minimum (1 for rods and disks).
    pub v0: f64,
}

/// `b0 = η / (κ + γ_sc⁰/2 - i[Δ - U0 v0])` at the potential minimum.
///
/// `γ_sc⁰` depends only on the configuration, so no iteration is needed.
pub fn steady_state_b0(system: &System, kernel: &ScatteringKernel) -> SteadyState {
    let (r0, m0) = equilibrium(system);
    let c = &system.coupling;
    let v0 = crate::optics::dimensionless_potential(system, &r0, &m0);
    let gamma_sc0 = c.gamma0 * kernel.evaluate(system, &r0, &m0, false).rate;
    let kappa_eff = c.kappa + 0.5 * gamma_sc0;
    let b0 = Complex64::new(c.eta, 0.0) / Complex64::new(kappa_eff, -(c.delta - c.u0 * v0));
    SteadyState {
        b0,
        photons: b0.norm_sqr(),
        gamma_sc0,
        kappa_eff,
        v0,
    }
}

/// Harmonic frequencies at the minimum, rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequencies {
    pub z: f64,
    /// Rod: in-plane libration toward `e_y`. Disk: free spin about `e_z` (0).
    pub alpha: f64,
    /// Rod: libration toward the cavity axis. Disk: tilt toward `e_y`.
    pub beta: f64,
    /// Disk only: tilt toward the polarization `e_x`.
    pub tilt_x: Option<f64>,
    /// Transverse `x, y` frequency, negligible for `w0 ≫ λ`.
    pub transverse: f64,
}

pub fn trap_frequencies(system: &System, photons: f64) -> Result<TrapFrequencies> {
    if !(photons >= 0.0 && photons.is_finite()) {
        return Err(Error::invalid("photons", format!("must be non-negative, got {photons}")));
    }
    let depth = system.hbar_u0().abs() * photons;
    let k = system.k();
    let rel = &system.relative;
    let mass = system.mass;
    let inertia = system.inertia;
    let w0 = system.waist();
    let size = system.size;
    Ok(match system.kind() {
        ParticleKind::Rod => {
            if rel.anisotropy < 0.0 {
                return Err(Error::invalid("permittivity", "rod with negative anisotropy is not trapped"));
            }
            TrapFrequencies {
                z: (2.0 * depth * k * k / mass).sqrt(),
                alpha: (2.0 * depth * rel.anisotropy / inertia).sqrt(),
                beta: (2.0 * depth * (rel.anisotropy + size * size / 12.0) / inertia).sqrt(),
                tilt_x: None,
                transverse: (4.0 * depth / (mass * w0 * w0)).sqrt(),
            }
        }
        ParticleKind::Disk => TrapFrequencies {
            z: (2.0 * depth * k * k / mass).sqrt(),
            alpha: 0.0,
            beta: (depth * size * size / (2.0 * inertia)).sqrt(),
            tilt_x: Some((depth * (size * size / 2.0 + 2.0 * rel.anisotropy.abs()) / inertia).sqrt()),
            transverse: (4.0 * depth / (mass * w0 * w0)).sqrt(),
        },
        ParticleKind::Sphere => TrapFrequencies {
            z: (2.0 * depth * rel.perpendicular * k * k / mass).sqrt(),
            alpha: 0.0,
            beta: 0.0,
            tilt_x: None,
            transverse: (4.0 * depth * rel.perpendicular / (mass * w0 * w0)).sqrt(),
        },
    })
}

/// One harmonic degree of freedom at the minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub name: String,
    /// rad/s.
    pub frequency: f64,
    /// `Σ_s ∫ d²n/4π |∂_ν A⁰|²`, in 1/m² for translations, dimensionless for rotations.
    pub diffusion: f64,
    /// Recoil-limited temperature, kelvin.
    pub temperature: f64,
    /// `k_B T / ħω`; `None` for unconfined modes.
    pub occupation: Option<f64>,
    /// `1 / (exp(ħω/k_B T) - 1)`; `None` for unconfined modes.
    pub bose_occupation: Option<f64>,
}

/// Closed-form temperatures valid for `kℓ ≪ 1` or `ka ≪ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallParticleLimits {
    /// `γ0 ħ² k² |b0|² / (5 M κ_eff k_B)`.
    pub t_z: f64,
    /// `γ0 ħ² Δχ² |b0|² / (2 I χ_m² κ_eff k_B)`.
    pub t_rot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub kind: ParticleKind,
    pub steady_state: SteadyState,
    pub frequencies: TrapFrequencies,
    pub modes: Vec<ModeReport>,
    pub small_particle: SmallParticleLimits,
}

impl CoolingReport {
    pub fn mode(&self, name: &str) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.name == name)
    }
}

/// Modes as `(name, frequency, tangent, mass-like)`; `tangent = None`
/// denotes the axial translation.
fn mode_table(system: &System, f: &TrapFrequencies) -> Vec<(&'static str, f64, Option<Vec3>, f64)> {
    let (m_i, i_i) = (system.mass, system.inertia);
    match system.kind() {
        ParticleKind::Rod => {
            // m = e_x is (α, β) = (0, π/2)
            let (ta, tb) = euler_tangents(0.0, std::f64::consts::FRAC_PI_2);
            vec![("z", f.z, None, m_i), ("alpha", f.alpha, Some(ta), i_i), ("beta", f.beta, Some(tb), i_i)]
        }
        ParticleKind::Disk => vec![
            ("z", f.z, None, m_i),
            ("alpha", 0.0, Some(Vec3::zeros()), i_i),
            ("beta", f.beta, Some(Vec3::y()), i_i),
            ("tilt_x", f.tilt_x.unwrap_or(0.0), Some(Vec3::x()), i_i),
        ],
        ParticleKind::Sphere => vec![("z", f.z, None, m_i)],
    }
}

/// Recoil temperatures from the angular integral of `|∂_ν A|²` at the minimum.
pub fn cooling_report(system: &System, degree: usize) -> Result<CoolingReport> {
    if degree < 20 {
        return Err(Error::QuadratureDegree(degree));
    }
    let quad = SphereQuadrature::new(degree)?;
    let kernel = ScatteringKernel::for_system(system, degree)?;
    let ss = steady_state_b0(system, &kernel);
    let frequencies = trap_frequencies(system, ss.photons)?;
    let (r0, m0) = equilibrium(system);
    let c = &system.coupling;
    let prefactor = c.gamma0 * HBAR * HBAR * ss.photons / (2.0 * ss.kappa_eff * BOLTZMANN);

    let table = mode_table(system, &frequencies);
    let mut diffusion = vec![0.0; table.len()];
    for node in &quad.nodes {
        for eps in &node.polarizations {
            let d = amplitude_with_derivatives(system, &node.n, eps, &r0, &m0);
            for (slot, (_, _, tangent, _)) in diffusion.iter_mut().zip(&table) {
                let da = match tangent {
                    None => d.grad_r[2],
                    Some(t) => d.along_m(t),
                };
                *slot += node.weight * da.norm_sqr();
            }
        }
    }

    let modes = table
        .iter()
        .zip(diffusion)
        .map(|(&(name, frequency, _, mass_like), diffusion)| {
            let temperature = prefactor * diffusion / mass_like;
            let confined = frequency > 0.0;
            let quantum = HBAR * frequency;
            ModeReport {
                name: name.to_string(),
                frequency,
                diffusion,
                temperature,
                occupation: confined.then(|| BOLTZMANN * temperature / quantum),
                bose_occupation: confined.then(|| {
                    if temperature > 0.0 {
                        1.0 / (quantum / (BOLTZMANN * temperature)).exp_m1()
                    } else {
                        0.0
                    }
                }),
            }
        })
        .collect();

    let k = system.k();
    let aniso = system.relative.anisotropy;
    let small_particle = SmallParticleLimits {
        t_z: c.gamma0 * HBAR * HBAR * k * k * ss.photons / (5.0 * system.mass * ss.kappa_eff * BOLTZMANN),
        t_rot: c.gamma0 * HBAR * HBAR * aniso * aniso * ss.photons
            / (2.0 * system.inertia * ss.kappa_eff * BOLTZMANN),
    };

    Ok(CoolingReport {
        kind: system.kind(),
        steady_state: ss,
        frequencies,
        modes,
        small_particle,
    })
}
