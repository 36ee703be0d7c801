//! Physical parameters and everything derived from them.
//!
//! All public quantities are SI. Rates are angular (rad/s) once they leave a
//! [`CavityConfig`]; the quoted numbers inside the config are converted
//! according to its [`RateConvention`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticleKind {
    Rod,
    Disk,
    Sphere,
}

impl ParticleKind {
    pub fn name(self) -> &'static str {
        match self {
            ParticleKind::Rod => "rod",
            ParticleKind::Disk => "disk",
            ParticleKind::Sphere => "sphere",
        }
    }

    /// Whether the orientation enters the optical potential.
    pub fn is_anisotropic(self) -> bool {
        !matches!(self, ParticleKind::Sphere)
    }
}

impl std::str::FromStr for ParticleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rod" => Ok(ParticleKind::Rod),
            "disk" => Ok(ParticleKind::Disk),
            "sphere" => Ok(ParticleKind::Sphere),
            other => Err(format!("unknown particle kind `{other}` (rod, disk, sphere)")),
        }
    }
}

/// Geometry and material of a rod, disk or comparison sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec {
    pub kind: ParticleKind,
    /// Rod length or disk thickness. Ignored for spheres.
    pub length: f64,
    /// Cylinder radius, or the sphere radius.
    pub radius: f64,
    pub density: f64,
    pub permittivity: f64,
}

impl ParticleSpec {
    pub fn new(
        kind: ParticleKind,
        length: f64,
        radius: f64,
        density: f64,
        permittivity: f64,
    ) -> Result<Self> {
        if kind != ParticleKind::Sphere && !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("length", format!("must be positive, got {length}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::invalid("density", format!("must be positive, got {density}")));
        }
        if !(permittivity >= 1.0 && permittivity.is_finite()) {
            return Err(Error::invalid(
                "permittivity",
                format!("must be real and >= 1, got {permittivity}"),
            ));
        }
        let length = if kind == ParticleKind::Sphere { 0.0 } else { length };
        Ok(Self {
            kind,
            length,
            radius,
            density,
            permittivity,
        })
    }

    pub fn rod(length: f64, radius: f64, density: f64, permittivity: f64) -> Result<Self> {
        Self::new(ParticleKind::Rod, length, radius, density, permittivity)
    }

    pub fn disk(thickness: f64, radius: f64, density: f64, permittivity: f64) -> Result<Self> {
        Self::new(ParticleKind::Disk, thickness, radius, density, permittivity)
    }

    pub fn sphere(radius: f64, density: f64, permittivity: f64) -> Result<Self> {
        Self::new(ParticleKind::Sphere, 0.0, radius, density, permittivity)
    }

    /// Sphere of the same volume and material.
    pub fn equivalent_sphere(&self) -> Result<Self> {
        let radius = match self.kind {
            ParticleKind::Sphere => self.radius,
            _ => equivalent_sphere(self.length, self.radius)?,
        };
        Self::sphere(radius, self.density, self.permittivity)
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            ParticleKind::Rod | ParticleKind::Disk => PI * self.radius * self.radius * self.length,
            ParticleKind::Sphere => 4.0 / 3.0 * PI * self.radius.powi(3),
        }
    }

    pub fn mass(&self) -> f64 {
        self.density * self.volume()
    }

    /// Moment of inertia about an axis perpendicular to the symmetry axis.
    ///
    /// Spheres are treated as point particles; the solid-sphere value is
    /// returned so that rotational bookkeeping stays finite.
    pub fn moment_of_inertia(&self) -> f64 {
        let mass = self.mass();
        match self.kind {
            ParticleKind::Rod => mass * self.length * self.length / 12.0,
            ParticleKind::Disk => mass * self.radius * self.radius / 4.0,
            ParticleKind::Sphere => 0.4 * mass * self.radius * self.radius,
        }
    }

    pub fn susceptibilities(&self) -> Susceptibilities {
        // permittivity >= 1 is enforced by the constructor
        derive_susceptibilities(self.kind, self.permittivity).expect("validated permittivity")
    }

    /// `kℓ` for rods, `ka` for disks and zero for spheres.
    pub fn size_parameter(&self, k: f64) -> f64 {
        match self.kind {
            ParticleKind::Rod => k * self.length,
            ParticleKind::Disk => k * self.radius,
            ParticleKind::Sphere => 0.0,
        }
    }
}

/// Components of the susceptibility tensor along and across the symmetry
/// axis, plus the maximal value `ε_r - 1` used to normalise the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Susceptibilities {
    pub parallel: f64,
    pub perpendicular: f64,
    pub maximal: f64,
}

impl Susceptibilities {
    pub fn anisotropy(&self) -> f64 {
        self.parallel - self.perpendicular
    }

    /// Orientation average `(χ_par + 2 χ_perp) / 3`.
    pub fn orientation_average(&self) -> f64 {
        (self.parallel + 2.0 * self.perpendicular) / 3.0
    }
}

pub fn derive_susceptibilities(kind: ParticleKind, permittivity: f64) -> Result<Susceptibilities> {
    if !(permittivity >= 1.0 && permittivity.is_finite()) {
        return Err(Error::invalid(
            "permittivity",
            format!("absorbing or metallic media are not supported (got {permittivity})"),
        ));
    }
    let chi = permittivity - 1.0;
    let s = match kind {
        ParticleKind::Rod => Susceptibilities {
            parallel: chi,
            perpendicular: 2.0 * chi / (permittivity + 1.0),
            maximal: chi,
        },
        ParticleKind::Disk => Susceptibilities {
            parallel: chi / permittivity,
            perpendicular: chi,
            maximal: chi,
        },
        ParticleKind::Sphere => {
            let iso = 3.0 * chi / (permittivity + 2.0);
            Susceptibilities {
                parallel: iso,
                perpendicular: iso,
                maximal: chi,
            }
        }
    };
    Ok(s)
}

/// Susceptibilities divided by `χ_m`, in closed form so that the vacuum
/// limit `ε_r → 1` stays finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeSusceptibility {
    /// `χ_perp / χ_m`
    pub perpendicular: f64,
    /// `Δχ / χ_m`
    pub anisotropy: f64,
}

impl RelativeSusceptibility {
    pub fn of(kind: ParticleKind, permittivity: f64) -> Self {
        let e = permittivity;
        match kind {
            ParticleKind::Rod => Self {
                perpendicular: 2.0 / (e + 1.0),
                anisotropy: 1.0 - 2.0 / (e + 1.0),
            },
            ParticleKind::Disk => Self {
                perpendicular: 1.0,
                anisotropy: 1.0 / e - 1.0,
            },
            ParticleKind::Sphere => Self {
                perpendicular: 3.0 / (e + 2.0),
                anisotropy: 0.0,
            },
        }
    }

    pub fn parallel(&self) -> f64 {
        self.perpendicular + self.anisotropy
    }
}

/// How quoted cavity rates are turned into angular rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// The quoted number already is the angular rate: `κ = 0.78e6 s⁻¹`.
    #[default]
    Angular,
    /// The quoted number is `κ/2π`: `κ = 2π · 0.78e6 s⁻¹`.
    DividedBy2Pi,
}

impl RateConvention {
    pub fn to_angular(self, quoted: f64) -> f64 {
        match self {
            RateConvention::Angular => quoted,
            RateConvention::DividedBy2Pi => 2.0 * PI * quoted,
        }
    }
}

impl std::str::FromStr for RateConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "angular" => Ok(RateConvention::Angular),
            "divided_by_2pi" | "divided_by_2π" => Ok(RateConvention::DividedBy2Pi),
            other => Err(format!(
                "unknown rate convention `{other}` (angular, divided_by_2pi)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeVolume {
    /// Mode volume in m³.
    Direct(f64),
    /// Choose `V_c` such that `|U0|/κ` equals the given ratio.
    CouplingRatio(f64),
}

/// Laser and cavity parameters as quoted by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    pub wavelength: f64,
    /// Quoted linewidth, converted with `rate_convention`.
    pub linewidth: f64,
    /// Quoted detuning `ω_p - ω_c`, converted with `rate_convention`.
    pub detuning: f64,
    pub pump_power: f64,
    pub waist: f64,
    pub mode_volume: ModeVolume,
    pub rate_convention: RateConvention,
}

impl CavityConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {x}")))
            }
        };
        positive("wavelength", self.wavelength)?;
        positive("linewidth", self.linewidth)?;
        positive("waist", self.waist)?;
        if !(self.pump_power >= 0.0 && self.pump_power.is_finite()) {
            return Err(Error::invalid(
                "power",
                format!("must be non-negative, got {}", self.pump_power),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        match self.mode_volume {
            ModeVolume::Direct(v) => positive("mode_volume", v),
            ModeVolume::CouplingRatio(r) => positive("coupling_ratio", r),
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn pump_frequency(&self) -> f64 {
        SPEED_OF_LIGHT * self.wavenumber()
    }

    pub fn kappa(&self) -> f64 {
        self.rate_convention.to_angular(self.linewidth)
    }

    pub fn delta(&self) -> f64 {
        self.rate_convention.to_angular(self.detuning)
    }

    /// `η = sqrt(2 κ P / ħ ω_p)`, from `P = ħ ω_p η² / 2κ`.
    pub fn pump_rate(&self) -> f64 {
        (2.0 * self.kappa() * self.pump_power / (HBAR * self.pump_frequency())).sqrt()
    }
}

/// Coupling constants derived from a particle in a cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub wavenumber: f64,
    pub pump_frequency: f64,
    pub kappa: f64,
    pub delta: f64,
    pub eta: f64,
    pub mode_volume: f64,
    /// Coupling frequency `U0 = -ω_p χ_m V0 / 2 V_c` (rad/s, ≤ 0).
    pub u0: f64,
    /// Rayleigh rate `γ0 = c χ_m² V0² k⁴ / 6π V_c` (1/s).
    pub gamma0: f64,
}

pub fn derive_coupling(particle: &ParticleSpec, cavity: &CavityConfig) -> Result<Coupling> {
    cavity.validate()?;
    let mode_volume = match cavity.mode_volume {
        ModeVolume::Direct(v) => v,
        ModeVolume::CouplingRatio(r) => calibrate_mode_volume(particle, cavity, r)?,
    };
    let k = cavity.wavenumber();
    let chi_m = particle.permittivity - 1.0;
    let v0 = particle.volume();
    let omega_p = cavity.pump_frequency();
    Ok(Coupling {
        wavenumber: k,
        pump_frequency: omega_p,
        kappa: cavity.kappa(),
        delta: cavity.delta(),
        eta: cavity.pump_rate(),
        mode_volume,
        u0: -omega_p * chi_m * v0 / (2.0 * mode_volume),
        gamma0: SPEED_OF_LIGHT * chi_m * chi_m * v0 * v0 * k.powi(4) / (6.0 * PI * mode_volume),
    })
}

/// Mode volume that yields `|U0|/κ = target_ratio`.
///
/// Volumes below `λ³` are rejected as unphysical.
pub fn calibrate_mode_volume(
    particle: &ParticleSpec,
    cavity: &CavityConfig,
    target_ratio: f64,
) -> Result<f64> {
    if !(target_ratio > 0.0 && target_ratio.is_finite()) {
        return Err(Error::invalid(
            "coupling_ratio",
            format!("must be positive, got {target_ratio}"),
        ));
    }
    let chi_m = particle.permittivity - 1.0;
    let vc = cavity.pump_frequency() * chi_m * particle.volume()
        / (2.0 * cavity.kappa() * target_ratio);
    let floor = cavity.wavelength.powi(3);
    if !(vc >= floor) {
        return Err(Error::invalid(
            "coupling_ratio",
            format!("calibrated mode volume {vc:e} m³ is below λ³ = {floor:e} m³"),
        ));
    }
    Ok(vc)
}

/// Radius of the sphere with the volume of a cylinder `(ℓ, a)`.
pub fn equivalent_sphere(length: f64, radius: f64) -> Result<f64> {
    if !(length > 0.0 && radius > 0.0) {
        return Err(Error::invalid(
            "length",
            "cylinder dimensions must be positive",
        ));
    }
    Ok((0.75 * radius * radius * length).cbrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub kind: ParticleKind,
    /// Human-readable form of the checked number.
    pub criterion: String,
    /// `π k² a² (ε_r - 1)` for rods, `k ℓ (ε_r - 1)` for disks; `None` for spheres.
    pub value: Option<f64>,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.5;

/// Dimensionless numbers that must stay small for the thin-particle
/// internal field to be accurate. Never fails, only warns.
pub fn validity_report(
    particle: &ParticleSpec,
    cavity: &CavityConfig,
    threshold: f64,
) -> ValidityReport {
    let k = cavity.wavenumber();
    let chi = particle.permittivity - 1.0;
    let (criterion, value) = match particle.kind {
        ParticleKind::Rod => (
            "pi k^2 a^2 (eps_r - 1)",
            Some(PI * k * k * particle.radius * particle.radius * chi),
        ),
        ParticleKind::Disk => ("k l (eps_r - 1)", Some(k * particle.length * chi)),
        ParticleKind::Sphere => ("point-particle limit (not checked)", None),
    };
    let mut warnings = Vec::new();
    if let Some(v) = value {
        if v > threshold {
            warnings.push(format!(
                "{criterion} = {v:.4} exceeds {threshold}; thin-particle field is unreliable"
            ));
        }
    }
    ValidityReport {
        kind: particle.kind,
        criterion: criterion.to_string(),
        value,
        threshold,
        warnings,
    }
}

/// A particle in a cavity, with every derived constant resolved once.
///
/// Immutable after construction and cheap to share between workers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub particle: ParticleSpec,
    pub cavity: CavityConfig,
    pub coupling: Coupling,
    pub relative: RelativeSusceptibility,
    pub mass: f64,
    pub inertia: f64,
    /// `kℓ` (rod) or `ka` (disk).
    pub size: f64,
}

impl System {
    pub fn new(particle: ParticleSpec, cavity: CavityConfig) -> Result<Self> {
        let coupling = derive_coupling(&particle, &cavity)?;
        let relative = RelativeSusceptibility::of(particle.kind, particle.permittivity);
        Ok(Self {
            mass: particle.mass(),
            inertia: particle.moment_of_inertia(),
            size: particle.size_parameter(coupling.wavenumber),
            particle,
            cavity,
            coupling,
            relative,
        })
    }

    /// Same cavity (with the mode volume frozen at its resolved value) but
    /// a different particle. Used to compare a rod against its sphere.
    pub fn with_particle(&self, particle: ParticleSpec) -> Result<Self> {
        let mut cavity = self.cavity.clone();
        cavity.mode_volume = ModeVolume::Direct(self.coupling.mode_volume);
        Self::new(particle, cavity)
    }

    pub fn kind(&self) -> ParticleKind {
        self.particle.kind
    }

    pub fn k(&self) -> f64 {
        self.coupling.wavenumber
    }

    pub fn waist(&self) -> f64 {
        self.cavity.waist
    }

    /// `ħ U0`, the energy scale of the potential per photon.
    pub fn hbar_u0(&self) -> f64 {
        HBAR * self.coupling.u0
    }

    pub fn validity(&self) -> ValidityReport {
        validity_report(&self.particle, &self.cavity, DEFAULT_VALIDITY_THRESHOLD)
    }

    /// Empty-cavity steady state `η / (κ - iΔ)`.
    pub fn empty_cavity_amplitude(&self) -> num_complex::Complex64 {
        let c = &self.coupling;
        num_complex::Complex64::new(c.eta, 0.0) / num_complex::Complex64::new(c.kappa, -c.delta)
    }
}
