//! `cryo-edram`: calibrate profiles, sample arrays, sweep supplies and
//! evaluate CIM workloads from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cryo_edram::Error;

#[derive(Parser)]
#[command(name = "cryo-edram", version, about = "Cryogenic gain-cell eDRAM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ProfileArg {
    /// Calibrated profile (TOML).
    #[arg(long, env = "CRYOEDRAM_PROFILE")]
    pub profile: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a profile to a set of anchors.
    Calibrate {
        /// Anchor file; the bundled anchor set when omitted.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Where to write the profile.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample one array: heat map, per-cell table and statistics.
    Array {
        #[command(flatten)]
        profile: ProfileArg,
        /// Temperature, K.
        #[arg(short = 'T', long)]
        temperature: f64,
        /// Supply, V; the profile's nominal supply when omitted.
        #[arg(long)]
        vdd: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also summarize this many chips.
        #[arg(long)]
        chips: Option<u32>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the supply and pick an operating point.
    Sweep {
        #[command(flatten)]
        profile: ProfileArg,
        #[arg(short = 'T', long)]
        temperature: f64,
        /// Supplies as a comma-separated list or `start:stop:step`.
        #[arg(long, default_value = "0.6:1.1:0.1")]
        grid: String,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MinRetention)]
        objective: ObjectiveArg,
        /// Tolerated fraction of failing cells; adds a joint supply/refresh choice.
        #[arg(long)]
        max_error: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a CIM workload.
    Cim {
        #[command(flatten)]
        profile: ProfileArg,
        /// Workload descriptor (TOML); the bundled ResNet-18 when omitted.
        #[arg(long)]
        workload: Option<PathBuf>,
        /// Temperature, K. Ignored with `--both`.
        #[arg(short = 'T', long, default_value_t = 4.2)]
        temperature: f64,
        #[arg(long)]
        vdd: Option<f64>,
        /// Evaluate at 300 K and 4.2 K and write the ratio table.
        #[arg(long)]
        both: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a profile's residual table, optionally re-evaluated on other anchors.
    Report {
        #[command(flatten)]
        profile: ProfileArg,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    MinRetention,
    MinDynamic,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Model(Error),
    /// Calibration finished but left mandatory anchors outside tolerance.
    Residuals(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn model_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 2,
        Error::Parse(_) | Error::Validation(_) => 4,
        Error::Domain { .. } => 5,
        Error::Calibration { .. } => 6,
        Error::Numeric { .. } => 7,
        Error::Cell { source, .. } => model_code(source),
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 3,
            Failure::Model(e) => model_code(e),
            Failure::Residuals(_) => 6,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Residuals(names) => {
                write!(f, "mandatory anchors outside tolerance: {}", names.join(", "))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate { targets, out } => commands::calibrate(targets.as_deref(), &out),
        Command::Array {
            profile,
            temperature,
            vdd,
            seed,
            chips,
            out,
        } => commands::array(&profile.profile, temperature, vdd, seed, chips, &out),
        Command::Sweep {
            profile,
            temperature,
            grid,
            objective,
            max_error,
            seed,
            out,
        } => commands::sweep(&profile.profile, temperature, &grid, objective, max_error, seed, &out),
        Command::Cim {
            profile,
            workload,
            temperature,
            vdd,
            both,
            seed,
            out,
        } => commands::cim(
            &profile.profile,
            workload.as_deref(),
            temperature,
            vdd,
            both,
            seed,
            &out,
        ),
        Command::Report {
            profile,
            targets,
            out,
        } => commands::report(&profile.profile, targets.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cryo-edram: {e}");
            ExitCode::from(e.code())
        }
    }
}
