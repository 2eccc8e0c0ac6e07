//! Batch driver for simulating, fitting, predicting with and scoring
//! higher-order HMMs.
//!
//! Every command is a pure function of its inputs and seed: outputs are
//! byte-identical across runs and worker counts.

pub mod args;
pub mod bench;
pub mod commands;
pub mod config;

use std::fmt;

pub use bench::{benchmark, score_fit, BenchmarkResult, BenchmarkSpec, MedianRow, Method, ScoreRow};
pub use commands::{fit, simulate, DATA_STREAM};
pub use config::{resolve_model, resolve_run, resolve_seed, FileConfig, ModelOverrides, RunOverrides};

/// Exit status of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flag, config file or environment value.
    Usage(String),
    Core(hohmm::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hohmm::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) | E::InvalidK(_) | E::Parse(_) => exit::USAGE,
                E::Numerical(_) | E::NonErgodic(_) | E::TooLarge(_) => exit::NUMERICAL,
                E::DimensionMismatch(_)
                | E::InvalidObservation { .. }
                | E::InsufficientData(_)
                | E::GridMismatch(_)
                | E::LengthMismatch { .. }
                | E::NonSquare { .. }
                | E::Io(_)
                | E::Json(_) => exit::DATA,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hohmm::Error> for CliError {
    fn from(e: hohmm::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(hohmm::Error::Io(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(hohmm::Error::Parse(e.to_string()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parse arguments, run the command and return the exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("hohmm: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(hohmm::Error::InvalidConfig("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(hohmm::Error::LengthMismatch { left: 1, right: 2 }).exit_code(), 3);
        assert_eq!(CliError::from(hohmm::Error::NonErgodic(5)).exit_code(), 4);
    }
}
