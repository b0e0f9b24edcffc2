//! Batch front end for `hsinv`: a TOML config plus flag overrides drives one
//! of six pipelines, each writing into a run directory with a manifest.
//!
//! Exit codes: 0 success, 1 failed invariance verdict, 2 usage error,
//! 3 numeric (or I/O) failure.

mod commands;
pub mod config;
pub mod registry;
mod render;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Bad flags, config or model names.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "hsinv", version, about = "Hermite-Sobolev transforms, invariance checks and SDE/SPDE simulation")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand; each overrides the matching config entry.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub paths: Option<usize>,
    #[arg(long = "max-degree", global = true, value_name = "K")]
    pub max_degree: Option<usize>,
    #[arg(long, global = true, value_name = "X", allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<String>,
    /// Print the effective configuration and exit.
    #[arg(long = "show-config", global = true)]
    pub show_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hermite coefficients, norms and reconstruction of a built-in function or delta.
    Transform {
        #[arg(long, value_name = "NAME")]
        function: Option<String>,
    },
    /// Invariance report for a built-in model; exit 1 when any condition fails.
    CheckInvariance,
    /// Euler–Maruyama paths of a built-in SDE model.
    SimulateSde,
    /// Translated-profile and Galerkin solutions of a built-in SPDE model under common noise.
    SimulateSpde,
    /// Distance series between two stored SPDE trajectories.
    Compare {
        #[arg(long, value_name = "PATH")]
        left: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        right: Option<PathBuf>,
    },
    /// Re-render stored JSON outputs as text.
    Report {
        /// Run directory or single JSON file; defaults to the configured output directory.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Transform { .. } => "transform",
            Command::CheckInvariance => "check-invariance",
            Command::SimulateSde => "simulate-sde",
            Command::SimulateSpde => "simulate-spde",
            Command::Compare { .. } => "compare",
            Command::Report { .. } => "report",
        }
    }
}

/// Parses `argv` (including the program name), runs the pipeline and returns the exit code.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match Config::resolve(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if cli.common.show_config {
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (transform, check-invariance, simulate-sde, simulate-spde, compare, report)");
        return EXIT_USAGE;
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let ctx = commands::Context {
        cfg,
        argv: args,
        subcommand: command.name(),
        out_given: cli.common.out.is_some(),
    };
    let result = match command {
        Command::Transform { function } => commands::transform(&ctx, function),
        Command::CheckInvariance => commands::check_invariance(&ctx),
        Command::SimulateSde => commands::simulate_sde(&ctx),
        Command::SimulateSpde => commands::simulate_spde(&ctx),
        Command::Compare { left, right } => commands::compare(&ctx, left, right),
        Command::Report { input } => commands::report(&ctx, input),
    };
    match result {
        Ok(commands::Outcome::Success) => EXIT_OK,
        Ok(commands::Outcome::VerdictFailed) => EXIT_VERDICT,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<hsinv::Error>() {
        Some(
            hsinv::Error::InvalidArgument(_)
            | hsinv::Error::SchemeMismatch { .. }
            | hsinv::Error::GridMismatch(_)
            | hsinv::Error::DegreeAboveCap { .. }
            | hsinv::Error::QuadratureTooLarge { .. },
        ) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}
