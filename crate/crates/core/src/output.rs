//! Output files: one JSON header line followed by CSV rows.
//!
//! The header records the config verbatim, its SHA-256, the resolved values
//! and the derived constants, so a file can be reproduced from itself.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::constants::HBAR;
use crate::params::{System, ValidityReport};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed output file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Constants derived from the config that a reader needs without
/// re-running the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub kind: String,
    pub mass: f64,
    pub inertia: f64,
    pub volume: f64,
    pub size_parameter: f64,
    pub kappa: f64,
    pub delta: f64,
    pub eta: f64,
    pub mode_volume: f64,
    pub u0: f64,
    pub gamma0: f64,
    pub empty_cavity_photons: f64,
    /// `ħ |U0| |b0|²` in joules.
    pub empty_cavity_depth: f64,
    pub validity: ValidityReport,
}

impl Derived {
    pub fn of(system: &System) -> Self {
        let c = &system.coupling;
        let photons = system.empty_cavity_amplitude().norm_sqr();
        Self {
            kind: system.kind().name().to_string(),
            mass: system.mass,
            inertia: system.inertia,
            volume: system.particle.volume(),
            size_parameter: system.size,
            kappa: c.kappa,
            delta: c.delta,
            eta: c.eta,
            mode_volume: c.mode_volume,
            u0: c.u0,
            gamma0: c.gamma0,
            empty_cavity_photons: photons,
            empty_cavity_depth: HBAR * c.u0.abs() * photons,
            validity: system.validity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub program: String,
    pub program_version: String,
    /// Subcommand or table name.
    pub kind: String,
    pub config_sha256: String,
    pub config_text: String,
    pub resolved: RunConfig,
    pub defaulted: Vec<String>,
    pub derived: Vec<Derived>,
    pub master_seed: u64,
    /// Table-specific metadata (seeds per point, flags).
    #[serde(default)]
    pub extra: serde_json::Value,
    pub columns: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Header {
    pub fn new(kind: &str, config_text: &str, resolved: &RunConfig, systems: &[&System], columns: &[&str]) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            program: "rotcav".into(),
            program_version: env!("CARGO_PKG_VERSION").into(),
            kind: kind.into(),
            config_sha256: sha256_hex(config_text),
            config_text: config_text.into(),
            resolved: resolved.clone(),
            defaulted: resolved.defaulted.clone(),
            derived: systems.iter().map(|s| Derived::of(s)).collect(),
            master_seed: resolved.seed,
            extra: serde_json::Value::Null,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_extra(mut self, extra: serde_json::Value) -> Self {
        self.extra = extra;
        self
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the header line then one CSV row per entry of `rows`.
pub fn write_table(path: &Path, header: &Header, rows: &[Vec<f64>]) -> Result<(), OutputError> {
    if let Some(bad) = rows.iter().position(|r| r.len() != header.columns.len()) {
        return Err(OutputError::Malformed {
            path: path.display().to_string(),
            message: format!("row {bad} has {} values for {} columns", rows[bad].len(), header.columns.len()),
        });
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_error(path))?);
    let mut body = serde_json::to_string(header)?;
    body.push('\n');
    body.push_str(&header.columns.join(","));
    body.push('\n');
    out.write_all(body.as_bytes()).map_err(io_error(path))?;
    for row in rows {
        let line = row.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}").map_err(io_error(path))?;
    }
    out.flush().map_err(io_error(path))
}

/// Writes a standalone JSON document with the same header fields.
pub fn write_json<T: Serialize>(path: &Path, header: &Header, payload: &T) -> Result<(), OutputError> {
    #[derive(Serialize)]
    struct Document<'a, T> {
        header: &'a Header,
        result: &'a T,
    }
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &Document { header, result: payload })?;
    writeln!(out).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))
}

pub fn read_table(path: &Path) -> Result<(Header, Vec<Vec<f64>>), OutputError> {
    let malformed = |message: String| OutputError::Malformed {
        path: path.display().to_string(),
        message,
    };
    let mut lines = BufReader::new(File::open(path).map_err(io_error(path))?).lines();
    let mut next = || lines.next().transpose().map_err(io_error(path));
    let header: Header = serde_json::from_str(&next()?.ok_or_else(|| malformed("empty file".into()))?)?;
    let names = next()?.ok_or_else(|| malformed("missing column line".into()))?;
    if names.split(',').ne(header.columns.iter().map(String::as_str)) {
        return Err(malformed("column line disagrees with header".into()));
    }
    let mut rows = Vec::new();
    while let Some(line) = next()? {
        let row = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|_| malformed(format!("bad value `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.columns.len() {
            return Err(malformed(format!("row {} has {} values", rows.len(), row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = "[particle]\nkind = \"rod\"\nlength = \"800 nm\"\nradius = \"25 nm\"\n\
        [cavity]\nwavelength = \"1.56 um\"\nlinewidth = \"0.78 MHz\"\ndetuning = \"-1.2 kappa\"\n\
        pump_power = \"10 mW\"\nwaist = \"5 um\"\ncoupling_ratio = 1.1\n";

    #[test]
    fn sha256_matches_reference() {
        assert_eq!(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn table_round_trip() {
        let config = RunConfig::parse(CONFIG).unwrap();
        let system = config.system().unwrap();
        let header = Header::new("test", CONFIG, &config, &[&system], &["a", "b"]).with_extra(serde_json::json!({"threads": 4}));
        let rows = vec![vec![1.0, -2.5e-7], vec![f64::MAX, 0.1]];
        let dir = std::env::temp_dir().join(format!("rotcav-output-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        write_table(&path, &header, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().nth(1), Some("a,b"));
        let (back, values) = read_table(&path).unwrap();
        assert_eq!(back, header);
        assert_eq!(values, rows);
        assert_eq!(back.config_text, CONFIG);
        let d = &back.derived[0];
        let photons = d.eta * d.eta / (d.kappa * d.kappa + d.delta * d.delta);
        assert!((d.empty_cavity_depth / (HBAR * d.u0.abs() * photons) - 1.0).abs() < 1e-12);
        assert!(write_table(&path, &header, &[vec![1.0]]).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
