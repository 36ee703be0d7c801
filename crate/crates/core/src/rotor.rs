//! Orientation of a symmetric particle and its finite-size shape functions.
//!
//! Propagation uses the symmetry axis `m` and the angular momentum `L ⊥ m`
//! (a linear rotor). Euler angles in the z-y'-z'' convention are only a
//! reporting chart; they are singular at `β ∈ {0, π}`, where aligned disks
//! live.

use serde::{Deserialize, Serialize};

use crate::params::ParticleKind;
use crate::special::{jinc, jinc_slope, sinc, sinc_prime};
use crate::Vec3;

/// Symmetry axis for Euler angles `(α, β)`; `γ` does not move it.
pub fn m_from_euler(alpha: f64, beta: f64) -> Vec3 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vec3::new(ca * sb, sa * sb, cb).normalize()
}

/// Inverse of [`m_from_euler`], with `α ∈ (-π, π]` and `β ∈ [0, π]`.
pub fn euler_from_m(m: &Vec3) -> (f64, f64) {
    let m = m.normalize();
    let beta = m.z.clamp(-1.0, 1.0).acos();
    let alpha = m.y.atan2(m.x);
    (alpha, beta)
}

/// Tangent vectors `∂m/∂α` and `∂m/∂β`.
pub fn euler_tangents(alpha: f64, beta: f64) -> (Vec3, Vec3) {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    (
        Vec3::new(-sa * sb, ca * sb, 0.0),
        Vec3::new(ca * cb, sa * cb, -sb),
    )
}

/// Some unit vector perpendicular to `m`.
pub fn any_perpendicular(m: &Vec3) -> Vec3 {
    let helper = if m.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    m.cross(&helper).normalize()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorState {
    /// Unit symmetry axis.
    pub m: Vec3,
    /// Angular momentum perpendicular to `m` (kg m²/s).
    pub l: Vec3,
    /// Conserved spin about the symmetry axis (kg m²/s). Only affects the
    /// kinetic energy bookkeeping of disks.
    #[serde(default)]
    pub spin: f64,
}

impl RotorState {
    /// Builds a state, normalising `m` and dropping the part of `l` along it.
    pub fn new(m: Vec3, l: Vec3) -> Self {
        let mut s = Self { m, l, spin: 0.0 };
        s.project();
        s
    }

    pub fn at_rest(m: Vec3) -> Self {
        Self::new(m, Vec3::zeros())
    }

    /// Restores `|m| = 1` and `m · L = 0`.
    pub fn project(&mut self) {
        self.m = self.m.normalize();
        self.l -= self.m * self.m.dot(&self.l);
    }

    pub fn kinetic_energy(&self, inertia: f64) -> f64 {
        self.l.norm_squared() / (2.0 * inertia)
    }

    pub fn angular_velocity(&self, inertia: f64) -> Vec3 {
        self.l / inertia
    }

    /// `ṁ = (L/I) × m`.
    pub fn axis_rate(&self, inertia: f64) -> Vec3 {
        self.angular_velocity(inertia).cross(&self.m)
    }
}

/// Euler-angle view of a rotor state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
    /// Set when `β` is within 1e-6 of a pole; the α quantities are then
    /// meaningless and set to zero.
    pub near_pole: bool,
}

impl EulerReport {
    /// `p_β²/2I + p_α²/(2I sin²β)`.
    pub fn kinetic_energy(&self, inertia: f64) -> f64 {
        let sb = self.beta.sin();
        self.p_beta * self.p_beta / (2.0 * inertia)
            + if self.near_pole {
                0.0
            } else {
                self.p_alpha * self.p_alpha / (2.0 * inertia * sb * sb)
            }
    }
}

pub fn euler_rates_from_state(state: &RotorState, inertia: f64) -> EulerReport {
    let (alpha, beta) = euler_from_m(&state.m);
    let mdot = state.axis_rate(inertia);
    let (e_alpha, e_beta) = euler_tangents(alpha, beta);
    let beta_dot = mdot.dot(&e_beta);
    let sb = beta.sin();
    let near_pole = sb.abs() < 1e-6;
    let alpha_dot = if near_pole {
        0.0
    } else {
        // e_alpha already carries one factor of sin β
        mdot.dot(&e_alpha) / (sb * sb)
    };
    EulerReport {
        alpha,
        beta,
        alpha_dot,
        beta_dot,
        p_alpha: inertia * sb * sb * alpha_dot,
        p_beta: inertia * beta_dot,
        near_pole,
    }
}

/// Shape function `S(m, n)` for a particle of the given kind.
///
/// `size` is `kℓ` for rods and `ka` for disks. `n` need not be a unit
/// vector. Both kernels equal one for vanishing argument and never exceed
/// one in magnitude.
pub fn shape(kind: ParticleKind, size: f64, m: &Vec3, n: &Vec3) -> f64 {
    match kind {
        ParticleKind::Rod => sinc(size * m.dot(n)),
        ParticleKind::Disk => jinc(size * m.cross(n).norm()),
        ParticleKind::Sphere => 1.0,
    }
}

/// Gradient of [`shape`] with respect to the components of `m`, treating
/// `m` as a free vector. Project onto the tangent plane before use.
pub fn shape_gradient(kind: ParticleKind, size: f64, m: &Vec3, n: &Vec3) -> Vec3 {
    match kind {
        ParticleKind::Rod => n * (size * sinc_prime(size * m.dot(n))),
        ParticleKind::Disk => {
            let y = size * m.cross(n).norm();
            let radial = m * n.norm_squared() - n * m.dot(n);
            -radial * (size * size * jinc_slope(y))
        }
        ParticleKind::Sphere => Vec3::zeros(),
    }
}
