use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use rotcav::config::{ConfigError, RunConfig};
use rotcav::output::OutputError;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "rotcav", about = "Rod, disk and sphere dynamics in a driven optical cavity", disable_version_flag = true)]
struct Cli {
    /// Print the version and exit.
    #[arg(long)]
    version: bool,
    /// With `--version`, print machine-readable JSON.
    #[arg(long, requires = "version")]
    json: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for `ensemble` (default: all cores).
    #[arg(long, env = "ROTCAV_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the config and print derived constants.
    Validate(Common),
    /// Optical potential on a (z, β) grid.
    PotentialMap(Common),
    /// One trajectory from `[trajectory]`.
    Trajectory(Common),
    /// Capture probability against launch velocity.
    Ensemble(Common),
    /// Recoil-limited temperatures over the `[cooling]` grid.
    CoolingLimits(Common),
    /// Far-field scattered intensity on a (z, θ) grid.
    IntensityMap(Common),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] rotcav::Error),
    #[error("{0}")]
    Output(#[from] OutputError),
    #[error("cannot create {path}: {source}")]
    Directory {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("undecided fraction above {limit} at v_x = {velocities:?} m/s")]
    Flagged { velocities: Vec<f64>, limit: f64 },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) if e.is_numerical() => 3,
            CliError::Model(rotcav::Error::Config(_) | rotcav::Error::InvalidParameter { .. }) => 2,
            CliError::Model(_) => 3,
            CliError::Flagged { .. } => 4,
            CliError::Output(_) | CliError::Directory { .. } => 1,
        }
    }
}

/// Parsed config with command-line overrides applied.
pub struct Run {
    pub text: String,
    pub config: RunConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Run {
    fn load(common: &Common) -> Result<Self, CliError> {
        let mut config = RunConfig::from_path(&common.config)?;
        let text = std::fs::read_to_string(&common.config).map_err(|e| ConfigError {
            kind: rotcav::config::ConfigErrorKind::Io(e.to_string()),
            line: 0,
            column: 0,
            file: Some(common.config.display().to_string()),
        })?;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        let out = common.out.clone().unwrap_or_else(|| config.output.directory.clone());
        Ok(Self {
            text,
            config,
            out,
            threads: common.threads,
        })
    }

    pub fn output_dir(&self) -> Result<&std::path::Path, CliError> {
        std::fs::create_dir_all(&self.out).map_err(|source| CliError::Directory {
            path: self.out.display().to_string(),
            source,
        })?;
        Ok(&self.out)
    }
}

fn version(json: bool) {
    let name = env!("CARGO_PKG_NAME");
    let version = env!("CARGO_PKG_VERSION");
    if json {
        let info = serde_json::json!({
            "name": "rotcav",
            "package": name,
            "version": version,
            "output_format_version": rotcav::output::FORMAT_VERSION,
        });
        println!("{info}");
    } else {
        println!("rotcav {version}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.version {
        version(cli.json);
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(2);
    };
    let result = match &command {
        Command::Validate(c) => Run::load(c).and_then(|r| commands::validate(&r)),
        Command::PotentialMap(c) => Run::load(c).and_then(|r| commands::potential_map(&r)),
        Command::Trajectory(c) => Run::load(c).and_then(|r| commands::trajectory(&r)),
        Command::Ensemble(c) => Run::load(c).and_then(|r| commands::ensemble(&r)),
        Command::CoolingLimits(c) => Run::load(c).and_then(|r| commands::cooling_limits(&r)),
        Command::IntensityMap(c) => Run::load(c).and_then(|r| commands::intensity_map(&r)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
