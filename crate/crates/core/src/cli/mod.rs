//! Command-line front end of the `stoch-duopoly` binary.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use crate::Error;
use config::{FileConfig, Overrides, RunConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable capping worker threads; `0` or unset means automatic.
pub const THREADS_ENV: &str = "STOCH_DUOPOLY_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::IndexOutOfRange(_)
            | Error::GridTooCoarse { .. }
            | Error::NotRotationScaling
            | Error::StepTooLarge { .. } => CliError::Config(e.to_string()),
            Error::DegenerateInput { .. }
            | Error::DiffusionDegenerate { .. }
            | Error::NormalizationFailure { .. }
            | Error::BetaZero
            | Error::SingularRecurrence { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stoch-duopoly",
    version,
    about = "Almost-sure stability of a Cournot duopoly driven by multiplicative noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary state, linearization, characteristic roots and λ
    Analyze(Overrides),
    /// λ over a range of alpha or beta, with sign changes
    Sweep(Overrides),
    /// Stationary phase densities
    Density(Overrides),
    /// Simulate a path of the nonlinear game
    Simulate(Overrides),
    /// Monte Carlo estimate of λ for the linearized system
    McLambda(Overrides),
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Analyze(o)
            | Command::Sweep(o)
            | Command::Density(o)
            | Command::Simulate(o)
            | Command::McLambda(o) => o,
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn resolve(command: &Command) -> Result<RunConfig, CliError> {
    let flags = command.overrides();
    let file = match &flags.config {
        Some(path) => config::load_file(path)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(file, flags)
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve(command)?;
    match command {
        Command::Analyze(_) => commands::analyze(&cfg, out),
        Command::Sweep(_) => commands::run_sweep(&cfg, out),
        Command::Density(_) => commands::run_density(&cfg, out, err),
        Command::Simulate(_) => commands::run_simulate(&cfg, out),
        Command::McLambda(_) => commands::run_mc_lambda(&cfg, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = configure_threads().and_then(|_| execute(&cli.command, out, err));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
