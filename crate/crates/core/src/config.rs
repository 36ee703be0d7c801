//! Strict TOML run configuration with unit-suffixed quantities.
//!
//! Dimensional values are strings such as `"800 nm"` or `"0.78 MHz"`; bare
//! numbers are rejected for them. Every error carries the line and column
//! of the offending entry.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::dynamics::{CavityMode, IntegratorConfig};
use crate::ensemble::{CaptureSettings, EnsembleConfig};
use crate::params::{CavityConfig, ModeVolume, ParticleKind, ParticleSpec, RateConvention, System};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(", did you mean `{s}`?")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{key}`: {message}")]
    Unit { key: String, message: String },
    #[error("`{key}`: expected {expected}")]
    Type { key: String, expected: String },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    /// 1-based; 0 when no position applies.
    pub line: usize,
    pub column: usize,
    pub file: Option<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        if self.line > 0 {
            write!(f, "{}:{}: ", self.line, self.column)?;
        } else if self.file.is_some() {
            write!(f, " ")?;
        }
        write!(f, "{}", self.kind)
    }
}

/// Physical dimension of a quantity and its accepted unit suffixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Length,
    /// Quoted rate, converted later with the cavity's rate convention.
    Rate,
    Power,
    Velocity,
    Time,
    Density,
    Volume,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("nm", 1e-9), ("pm", 1e-12)],
            Dimension::Rate => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9), ("1/s", 1.0)],
            Dimension::Power => &[("W", 1.0), ("mW", 1e-3), ("uW", 1e-6), ("µW", 1e-6), ("nW", 1e-9)],
            Dimension::Velocity => &[("m/s", 1.0), ("mm/s", 1e-3), ("um/s", 1e-6)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Dimension::Density => &[("kg/m3", 1.0), ("g/cm3", 1e3)],
            Dimension::Volume => &[("m3", 1.0), ("mm3", 1e-9), ("um3", 1e-18)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Rate => "rate",
            Dimension::Power => "power",
            Dimension::Velocity => "velocity",
            Dimension::Time => "time",
            Dimension::Density => "density",
            Dimension::Volume => "volume",
        }
    }

    fn unit_list(self) -> String {
        self.units().iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
    }
}

/// Splits `"<number> <unit>"` into the number and the unit.
fn split_quantity(text: &str) -> Option<(f64, &str)> {
    let text = text.trim();
    let end = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit() || c == '.' || c == '_' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && i > 0))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let number = text[..end].trim().replace('_', "");
    let unit = text[end..].trim();
    number.parse::<f64>().ok().map(|x| (x, unit))
}

pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let (x, unit) = split_quantity(text).ok_or_else(|| format!("cannot read a number from \"{text}\""))?;
    if unit.is_empty() {
        return Err(format!("missing unit; expected a {} in one of {}", dim.name(), dim.unit_list()));
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, scale)| x * scale)
        .ok_or_else(|| format!("unit `{unit}` is not a {} (expected one of {})", dim.name(), dim.unit_list()))
}

/// Fully resolved configuration. Physical values are SI; rates are quoted
/// values still subject to `cavity.rate_convention`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub particle: ParticleSpec,
    pub cavity: CavityConfig,
    pub integrator: IntegratorConfig,
    pub capture: CaptureSettings,
    pub ensemble: EnsembleSection,
    pub trajectory: TrajectorySection,
    pub maps: MapSection,
    pub cooling: CoolingSection,
    pub output: OutputSection,
    /// Dotted keys that were filled from defaults.
    pub defaulted: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSection {
    /// m/s.
    pub velocities: Vec<f64>,
    pub trajectories: usize,
    pub vz_spread: f64,
    /// Quoted rotation rate, converted with the cavity's rate convention.
    pub rotation_frequency: f64,
    pub launch_offset: f64,
    /// Also run the equal-volume sphere.
    pub compare_sphere: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySection {
    /// m/s.
    pub vx: f64,
    pub vz: f64,
    /// Initial `z`, meters; sampled from the seed when absent.
    pub z0: Option<f64>,
    /// Seconds; defaults to `max_crossings` crossing times.
    pub duration: Option<f64>,
    pub equivalent_sphere: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub z_points: usize,
    pub angle_points: usize,
    /// Detector distance for `intensity-map`, meters.
    pub detector_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingSection {
    /// Quoted detunings.
    pub detunings: Vec<f64>,
    /// Watts.
    pub pump_powers: Vec<f64>,
    pub quadrature_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            kind: ConfigErrorKind::Io(e.to_string()),
            line: 0,
            column: 0,
            file: Some(path.display().to_string()),
        })?;
        Self::parse(&text).map_err(|mut e| {
            e.file = Some(path.display().to_string());
            e
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Parser::new(text).run()
    }

    pub fn system(&self) -> crate::Result<System> {
        System::new(self.particle.clone(), self.cavity.clone())
    }

    /// Same cavity with the equal-volume sphere. The mode volume is kept,
    /// so the sphere sees the rod's `V_c` rather than its own calibration.
    pub fn sphere_system(&self) -> crate::Result<System> {
        self.system()?.with_particle(self.particle.equivalent_sphere()?)
    }

    pub fn rotation_rate(&self) -> f64 {
        self.cavity.rate_convention.to_angular(self.ensemble.rotation_frequency)
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            velocities: self.ensemble.velocities.clone(),
            trajectories: self.ensemble.trajectories,
            master_seed: self.seed,
            vz_spread: self.ensemble.vz_spread,
            rotation_rate: self.rotation_rate(),
            launch_offset: self.ensemble.launch_offset,
            capture: self.capture,
            integrator: self.integrator,
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "particle",
    "cavity",
    "integrator",
    "capture",
    "ensemble",
    "trajectory",
    "maps",
    "cooling",
    "output",
];

fn nearest<'a>(key: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(key, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

struct Parser<'i> {
    text: &'i str,
    defaulted: Vec<String>,
}

type Table<'i> = DeTable<'i>;

/// One section with its span, used to check and read keys.
struct Section<'a, 'i> {
    name: &'static str,
    table: Option<&'a Table<'i>>,
    span: Range<usize>,
}

impl<'i> Parser<'i> {
    fn new(text: &'i str) -> Self {
        Self {
            text,
            defaulted: Vec::new(),
        }
    }

    fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map(|i| before[i + 1..].chars().count()).unwrap_or(before.chars().count()) + 1;
        (line, column)
    }

    fn error(&self, span: Range<usize>, kind: ConfigErrorKind) -> ConfigError {
        let (line, column) = self.position(span.start);
        ConfigError {
            kind,
            line,
            column,
            file: None,
        }
    }

    fn run(mut self) -> Result<RunConfig, ConfigError> {
        let doc = DeTable::parse(self.text).map_err(|e| {
            let span = e.span().unwrap_or(0..0);
            self.error(span, ConfigErrorKind::Syntax(e.message().trim().to_string()))
        })?;
        let root_span = doc.span();
        let root = doc.get_ref();
        let top = Section {
            name: "",
            table: Some(root),
            span: root_span.clone(),
        };
        self.check_keys(&top, TOP_KEYS)?;
        let seed = self.integer(&top, "seed", Some(0))? as u64;

        let particle = self.particle(&self.section(root, "particle", true)?)?;
        let cavity = self.cavity(&self.section(root, "cavity", true)?)?;
        let integrator = self.integrator(&self.section(root, "integrator", false)?)?;
        let capture = self.capture(&self.section(root, "capture", false)?)?;
        let ensemble = self.ensemble(&self.section(root, "ensemble", false)?)?;
        let trajectory = self.trajectory(&self.section(root, "trajectory", false)?)?;
        let maps = self.maps(&self.section(root, "maps", false)?)?;
        let cooling_section = self.section(root, "cooling", false)?;
        let cooling = self.cooling(&cooling_section, &cavity)?;
        let output = self.output(&self.section(root, "output", false)?)?;

        let config = RunConfig {
            seed,
            particle,
            cavity,
            integrator,
            capture,
            ensemble,
            trajectory,
            maps,
            cooling,
            output,
            defaulted: std::mem::take(&mut self.defaulted),
        };
        let cavity_span = self.section(root, "cavity", true)?.span;
        config
            .system()
            .map_err(|e| self.error(cavity_span.clone(), ConfigErrorKind::Invalid { key: "cavity".into(), message: e.to_string() }))?;
        config
            .sphere_system()
            .map_err(|e| self.error(cavity_span, ConfigErrorKind::Invalid { key: "particle".into(), message: e.to_string() }))?;
        Ok(config)
    }

    fn section<'a>(&self, root: &'a Table<'i>, name: &'static str, required: bool) -> Result<Section<'a, 'i>, ConfigError> {
        match root.get(name) {
            Some(v) => match v.get_ref() {
                DeValue::Table(t) => Ok(Section {
                    name,
                    table: Some(t),
                    span: v.span(),
                }),
                _ => Err(self.error(
                    v.span(),
                    ConfigErrorKind::Type {
                        key: name.into(),
                        expected: "a table".into(),
                    },
                )),
            },
            None if required => Err(self.error(0..0, ConfigErrorKind::MissingKey(format!("[{name}]")))),
            None => Ok(Section {
                name,
                table: None,
                span: 0..0,
            }),
        }
    }

    fn check_keys(&self, section: &Section<'_, 'i>, allowed: &[&str]) -> Result<(), ConfigError> {
        let Some(table) = section.table else { return Ok(()) };
        for (key, _) in table.iter() {
            let name = key.get_ref().as_ref();
            if !allowed.contains(&name) {
                return Err(self.error(
                    key.span(),
                    ConfigErrorKind::UnknownKey {
                        key: dotted(section.name, name),
                        suggestion: nearest(name, allowed).map(|s| dotted(section.name, s)),
                    },
                ));
            }
        }
        Ok(())
    }

    fn lookup<'a>(&self, section: &Section<'a, 'i>, key: &str) -> Option<&'a Spanned<DeValue<'i>>> {
        section.table.and_then(|t| t.get(key))
    }

    fn missing(&self, section: &Section<'_, 'i>, key: &str) -> ConfigError {
        self.error(section.span.clone(), ConfigErrorKind::MissingKey(dotted(section.name, key)))
    }

    fn note_default(&mut self, section: &Section<'_, 'i>, key: &str) {
        self.defaulted.push(dotted(section.name, key));
    }

    fn type_error(&self, section: &Section<'_, 'i>, key: &str, span: Range<usize>, expected: &str) -> ConfigError {
        self.error(
            span,
            ConfigErrorKind::Type {
                key: dotted(section.name, key),
                expected: expected.into(),
            },
        )
    }

    fn number_of(&self, value: &DeValue<'i>) -> Option<f64> {
        match value {
            DeValue::Integer(i) => i.as_str().replace('_', "").parse::<i64>().ok().map(|x| x as f64),
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().ok(),
            _ => None,
        }
    }

    fn number(&mut self, section: &Section<'_, 'i>, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => self.number_of(v.get_ref()).ok_or_else(|| self.type_error(section, key, v.span(), "a plain number")),
            None => default.inspect(|_| self.note_default(section, key))
            .ok_or_else(|| self.missing(section, key)),
        }
    }

    fn integer(&mut self, section: &Section<'_, 'i>, key: &str, default: Option<i64>) -> Result<i64, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => match v.get_ref() {
                DeValue::Integer(i) => {
                    let parsed = i.as_str().replace('_', "");
                    i64::from_str_radix(&parsed, i.radix())
                        .ok()
                        .filter(|x| *x >= 0)
                        .ok_or_else(|| self.type_error(section, key, v.span(), "a non-negative integer"))
                }
                _ => Err(self.type_error(section, key, v.span(), "a non-negative integer")),
            },
            None => default
                .inspect(|_| self.note_default(section, key))
                .ok_or_else(|| self.missing(section, key)),
        }
    }

    fn boolean(&mut self, section: &Section<'_, 'i>, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => match v.get_ref() {
                DeValue::Boolean(b) => Ok(*b),
                _ => Err(self.type_error(section, key, v.span(), "true or false")),
            },
            None => {
                self.note_default(section, key);
                Ok(default)
            }
        }
    }

    fn string(&mut self, section: &Section<'_, 'i>, key: &str, default: Option<&str>) -> Result<(String, Range<usize>), ConfigError> {
        match self.lookup(section, key) {
            Some(v) => match v.get_ref() {
                DeValue::String(s) => Ok((s.to_string(), v.span())),
                _ => Err(self.type_error(section, key, v.span(), "a string")),
            },
            None => match default {
                Some(d) => {
                    self.note_default(section, key);
                    Ok((d.to_string(), section.span.clone()))
                }
                None => Err(self.missing(section, key)),
            },
        }
    }

    fn choice<T: std::str::FromStr<Err = String>>(
        &mut self,
        section: &Section<'_, 'i>,
        key: &str,
        default: Option<&str>,
    ) -> Result<T, ConfigError> {
        let (text, span) = self.string(section, key, default)?;
        text.parse::<T>().map_err(|message| {
            self.error(
                span,
                ConfigErrorKind::Invalid {
                    key: dotted(section.name, key),
                    message,
                },
            )
        })
    }

    fn quantity_of(&self, section: &Section<'_, 'i>, key: &str, value: &Spanned<DeValue<'i>>, dim: Dimension) -> Result<f64, ConfigError> {
        match value.get_ref() {
            DeValue::String(s) => parse_quantity(s, dim).map_err(|message| {
                self.error(
                    value.span(),
                    ConfigErrorKind::Unit {
                        key: dotted(section.name, key),
                        message,
                    },
                )
            }),
            DeValue::Integer(_) | DeValue::Float(_) => Err(self.error(
                value.span(),
                ConfigErrorKind::Unit {
                    key: dotted(section.name, key),
                    message: format!("bare number; write it with a unit, e.g. \"{} {}\"", self.number_of(value.get_ref()).unwrap_or(0.0), dim.units()[0].0),
                },
            )),
            _ => Err(self.type_error(section, key, value.span(), &format!("a {} string such as \"1 {}\"", dim.name(), dim.units()[0].0))),
        }
    }

    fn quantity(&mut self, section: &Section<'_, 'i>, key: &str, dim: Dimension, default: Option<f64>) -> Result<f64, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => self.quantity_of(section, key, v, dim),
            None => default
                .inspect(|_| self.note_default(section, key))
                .ok_or_else(|| self.missing(section, key)),
        }
    }

    fn optional_quantity(&mut self, section: &Section<'_, 'i>, key: &str, dim: Dimension) -> Result<Option<f64>, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => self.quantity_of(section, key, v, dim).map(Some),
            None => {
                self.note_default(section, key);
                Ok(None)
            }
        }
    }

    fn quantity_list(&mut self, section: &Section<'_, 'i>, key: &str, dim: Dimension, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        match self.lookup(section, key) {
            Some(v) => match v.get_ref() {
                DeValue::Array(items) => items.iter().map(|item| self.quantity_of(section, key, item, dim)).collect(),
                _ => Err(self.type_error(section, key, v.span(), "an array of quantities")),
            },
            None => {
                self.note_default(section, key);
                Ok(default)
            }
        }
    }

    fn invalid(&self, section: &Section<'_, 'i>, key: &str, message: impl Into<String>) -> ConfigError {
        let span = self.lookup(section, key).map(|v| v.span()).unwrap_or(section.span.clone());
        self.error(
            span,
            ConfigErrorKind::Invalid {
                key: dotted(section.name, key),
                message: message.into(),
            },
        )
    }

    fn particle(&mut self, s: &Section<'_, 'i>) -> Result<ParticleSpec, ConfigError> {
        self.check_keys(s, &["kind", "length", "thickness", "radius", "density", "permittivity"])?;
        let kind: ParticleKind = self.choice(s, "kind", None)?;
        let length = match kind {
            ParticleKind::Rod => {
                if self.lookup(s, "thickness").is_some() {
                    return Err(self.invalid(s, "thickness", "rods take `length`, not `thickness`"));
                }
                self.quantity(s, "length", Dimension::Length, None)?
            }
            ParticleKind::Disk => {
                if self.lookup(s, "length").is_some() {
                    return Err(self.invalid(s, "length", "disks take `thickness`, not `length`"));
                }
                self.quantity(s, "thickness", Dimension::Length, None)?
            }
            ParticleKind::Sphere => {
                for key in ["length", "thickness"] {
                    if self.lookup(s, key).is_some() {
                        return Err(self.invalid(s, key, "spheres take only `radius`"));
                    }
                }
                0.0
            }
        };
        let radius = self.quantity(s, "radius", Dimension::Length, None)?;
        let density = self.quantity(s, "density", Dimension::Density, Some(crate::constants::SILICON_DENSITY))?;
        let permittivity = self.number(s, "permittivity", Some(crate::constants::SILICON_PERMITTIVITY))?;
        ParticleSpec::new(kind, length, radius, density, permittivity).map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => self.invalid(s, name, reason),
            other => self.invalid(s, "kind", other.to_string()),
        })
    }

    fn cavity(&mut self, s: &Section<'_, 'i>) -> Result<CavityConfig, ConfigError> {
        self.check_keys(
            s,
            &[
                "wavelength",
                "linewidth",
                "detuning",
                "pump_power",
                "waist",
                "coupling_ratio",
                "mode_volume",
                "rate_convention",
            ],
        )?;
        let wavelength = self.quantity(s, "wavelength", Dimension::Length, None)?;
        let linewidth = self.quantity(s, "linewidth", Dimension::Rate, None)?;
        let detuning = match self.lookup(s, "detuning") {
            Some(v) => match v.get_ref() {
                DeValue::String(text) if text.trim().ends_with("kappa") => {
                    let number = text.trim().trim_end_matches("kappa").trim().replace('_', "");
                    let x: f64 = number.parse().map_err(|_| {
                        self.error(
                            v.span(),
                            ConfigErrorKind::Unit {
                                key: "cavity.detuning".into(),
                                message: format!("cannot read a number from \"{text}\""),
                            },
                        )
                    })?;
                    x * linewidth
                }
                _ => self.quantity_of(s, "detuning", v, Dimension::Rate)?,
            },
            None => return Err(self.missing(s, "detuning")),
        };
        let pump_power = self.quantity(s, "pump_power", Dimension::Power, None)?;
        let waist = self.quantity(s, "waist", Dimension::Length, None)?;
        let mode_volume = match (self.lookup(s, "coupling_ratio").is_some(), self.lookup(s, "mode_volume").is_some()) {
            (true, true) => return Err(self.invalid(s, "mode_volume", "give either `coupling_ratio` or `mode_volume`, not both")),
            (false, true) => ModeVolume::Direct(self.quantity(s, "mode_volume", Dimension::Volume, None)?),
            (true, false) => ModeVolume::CouplingRatio(self.number(s, "coupling_ratio", None)?),
            (false, false) => return Err(self.missing(s, "coupling_ratio")),
        };
        let rate_convention: RateConvention = self.choice(s, "rate_convention", Some("angular"))?;
        let cavity = CavityConfig {
            wavelength,
            linewidth,
            detuning,
            pump_power,
            waist,
            mode_volume,
            rate_convention,
        };
        cavity.validate().map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => self.invalid(s, name, reason),
            other => self.invalid(s, "wavelength", other.to_string()),
        })?;
        Ok(cavity)
    }

    fn integrator(&mut self, s: &Section<'_, 'i>) -> Result<IntegratorConfig, ConfigError> {
        self.check_keys(
            s,
            &[
                "rel_tol",
                "abs_tol",
                "max_step",
                "output_interval",
                "cavity_mode",
                "scattering_loss",
                "radiation_pressure",
                "quadrature_degree",
                "max_steps",
            ],
        )?;
        let d = IntegratorConfig::default();
        let cavity_mode: CavityMode = self.choice(s, "cavity_mode", Some("dynamic"))?;
        let config = IntegratorConfig {
            rel_tol: self.number(s, "rel_tol", Some(d.rel_tol))?,
            abs_tol: self.number(s, "abs_tol", Some(d.abs_tol))?,
            max_step: self.quantity(s, "max_step", Dimension::Time, Some(d.max_step))?,
            output_interval: self.quantity(s, "output_interval", Dimension::Time, Some(d.output_interval))?,
            cavity_mode,
            scattering_loss: self.boolean(s, "scattering_loss", d.scattering_loss)?,
            radiation_pressure: self.boolean(s, "radiation_pressure", d.radiation_pressure)?,
            quadrature_degree: self.integer(s, "quadrature_degree", Some(d.quadrature_degree as i64))? as usize,
            max_steps: self.integer(s, "max_steps", Some(d.max_steps as i64))? as usize,
        };
        config.validate().map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => self.invalid(s, name, reason),
            other => self.invalid(s, "rel_tol", other.to_string()),
        })?;
        Ok(config)
    }

    fn capture(&mut self, s: &Section<'_, 'i>) -> Result<CaptureSettings, ConfigError> {
        self.check_keys(s, &["max_crossings", "window_crossings", "depth_fraction", "capture_radius", "exit_radius"])?;
        let d = CaptureSettings::default();
        let c = CaptureSettings {
            max_crossings: self.number(s, "max_crossings", Some(d.max_crossings))?,
            window_crossings: self.number(s, "window_crossings", Some(d.window_crossings))?,
            depth_fraction: self.number(s, "depth_fraction", Some(d.depth_fraction))?,
            capture_radius: self.number(s, "capture_radius", Some(d.capture_radius))?,
            exit_radius: self.number(s, "exit_radius", Some(d.exit_radius))?,
        };
        c.validate().map_err(|e| match e {
            crate::Error::InvalidParameter { name, reason } => self.invalid(s, name, reason),
            other => self.invalid(s, "max_crossings", other.to_string()),
        })?;
        Ok(c)
    }

    fn ensemble(&mut self, s: &Section<'_, 'i>) -> Result<EnsembleSection, ConfigError> {
        self.check_keys(
            s,
            &["velocities", "trajectories", "vz_spread", "rotation_frequency", "launch_offset", "compare_sphere"],
        )?;
        let default_grid = vec![0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 3.0];
        let e = EnsembleSection {
            velocities: self.quantity_list(s, "velocities", Dimension::Velocity, default_grid)?,
            trajectories: self.integer(s, "trajectories", Some(2000))? as usize,
            vz_spread: self.number(s, "vz_spread", Some(0.05))?,
            rotation_frequency: self.quantity(s, "rotation_frequency", Dimension::Rate, Some(1e6))?,
            launch_offset: self.number(s, "launch_offset", Some(3.0))?,
            compare_sphere: self.boolean(s, "compare_sphere", true)?,
        };
        if e.velocities.is_empty() || e.velocities.iter().any(|v| !(*v > 0.0)) {
            return Err(self.invalid(s, "velocities", "need at least one positive velocity"));
        }
        if e.trajectories < 100 {
            return Err(self.invalid(s, "trajectories", format!("need at least 100, got {}", e.trajectories)));
        }
        if !(0.0..=1.0).contains(&e.vz_spread) {
            return Err(self.invalid(s, "vz_spread", "must lie in [0, 1]"));
        }
        if !(e.rotation_frequency >= 0.0) {
            return Err(self.invalid(s, "rotation_frequency", "must be non-negative"));
        }
        if !(e.launch_offset > 0.0) {
            return Err(self.invalid(s, "launch_offset", "must be positive"));
        }
        Ok(e)
    }

    fn trajectory(&mut self, s: &Section<'_, 'i>) -> Result<TrajectorySection, ConfigError> {
        self.check_keys(s, &["vx", "vz", "z0", "duration", "equivalent_sphere"])?;
        let t = TrajectorySection {
            vx: self.quantity(s, "vx", Dimension::Velocity, Some(0.5))?,
            vz: self.quantity(s, "vz", Dimension::Velocity, Some(-0.3))?,
            z0: self.optional_quantity(s, "z0", Dimension::Length)?,
            duration: self.optional_quantity(s, "duration", Dimension::Time)?,
            equivalent_sphere: self.boolean(s, "equivalent_sphere", false)?,
        };
        if !(t.vx > 0.0) {
            return Err(self.invalid(s, "vx", "must be positive"));
        }
        if matches!(t.duration, Some(d) if !(d > 0.0)) {
            return Err(self.invalid(s, "duration", "must be positive"));
        }
        Ok(t)
    }

    fn maps(&mut self, s: &Section<'_, 'i>) -> Result<MapSection, ConfigError> {
        self.check_keys(s, &["z_points", "angle_points", "detector_distance"])?;
        let m = MapSection {
            z_points: self.integer(s, "z_points", Some(101))? as usize,
            angle_points: self.integer(s, "angle_points", Some(91))? as usize,
            detector_distance: self.quantity(s, "detector_distance", Dimension::Length, Some(0.01))?,
        };
        for (key, n) in [("z_points", m.z_points), ("angle_points", m.angle_points)] {
            if n < 2 {
                return Err(self.invalid(s, key, "need at least 2 points"));
            }
        }
        if !(m.detector_distance > 0.0) {
            return Err(self.invalid(s, "detector_distance", "must be positive"));
        }
        Ok(m)
    }

    fn cooling(&mut self, s: &Section<'_, 'i>, cavity: &CavityConfig) -> Result<CoolingSection, ConfigError> {
        self.check_keys(s, &["detunings", "pump_powers", "quadrature_degree"])?;
        let detunings = match self.lookup(s, "detunings") {
            Some(v) => match v.get_ref() {
                DeValue::Array(items) => items
                    .iter()
                    .map(|item| match item.get_ref() {
                        DeValue::String(text) if text.trim().ends_with("kappa") => text
                            .trim()
                            .trim_end_matches("kappa")
                            .trim()
                            .parse::<f64>()
                            .map(|x| x * cavity.linewidth)
                            .map_err(|_| self.invalid(s, "detunings", format!("cannot read \"{text}\""))),
                        _ => self.quantity_of(s, "detunings", item, Dimension::Rate),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                _ => return Err(self.type_error(s, "detunings", v.span(), "an array of rates")),
            },
            None => {
                self.note_default(s, "detunings");
                vec![cavity.detuning]
            }
        };
        let pump_powers = self.quantity_list(s, "pump_powers", Dimension::Power, vec![cavity.pump_power])?;
        let quadrature_degree = self.integer(s, "quadrature_degree", Some(30))? as usize;
        if !(20..=50).contains(&quadrature_degree) {
            return Err(self.invalid(s, "quadrature_degree", "must lie in 20..=50"));
        }
        if detunings.is_empty() || pump_powers.is_empty() || pump_powers.iter().any(|p| !(*p > 0.0)) {
            return Err(self.invalid(s, "pump_powers", "grid must be non-empty with positive powers"));
        }
        Ok(CoolingSection {
            detunings,
            pump_powers,
            quadrature_degree,
        })
    }

    fn output(&mut self, s: &Section<'_, 'i>) -> Result<OutputSection, ConfigError> {
        self.check_keys(s, &["directory"])?;
        let (dir, _) = self.string(s, "directory", Some("out"))?;
        Ok(OutputSection {
            directory: PathBuf::from(dir),
        })
    }
}

fn dotted(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}
