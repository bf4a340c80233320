//! The `hpoly` command-line tool: argument parsing, dispatch and the
//! JSON/CSV/SVG writers.

pub mod args;
mod commands;
pub mod output;
mod svg;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

use args::Cli;

/// Exit status for invalid input.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures and I/O errors.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hpoly::Error> for CliError {
    fn from(e: hpoly::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

fn configure_threads(requested: usize) -> usize {
    let n = if requested == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        requested
    };
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    n
}

/// Parses `argv`, runs the command and writes its outputs. Returns the
/// process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = configure_threads(cli.global.threads);
    match commands::run(&cli).and_then(|out| output::write_outputs(&cli, threads, &out)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("hpoly: {e}");
            output::write_failure(&cli, threads, &e);
            e.exit_code()
        }
    }
}
