//! Experiment driver behind the `qnoise` binary.
//!
//! [`run`] parses arguments, resolves and validates a [`commands::Job`],
//! echoes its effective parameters to stderr, executes it and writes CSV.
//! The return value is the process exit code.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

use checks::{ChannelSet, ChannelSource};
use commands::Job;
use config::{Cli, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BREACH: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Breach(String),
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Breach(_) => EXIT_BREACH,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }
}

impl From<qnoise::Error> for CliError {
    fn from(err: qnoise::Error) -> Self {
        CliError::Usage(err.to_string())
    }
}

pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_channels(args, ChannelSet::standard, stdout, stderr)
}

/// [`run`] with channel-check reading its Kraus sets from `source`.
pub fn run_with_channels<I, T>(args: I, source: ChannelSource, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let text = err.render().to_string();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, source, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            err.exit_code()
        }
    }
}

fn execute(cli: Cli, source: ChannelSource, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (kind, flags) = cli.command.split();
    let settings = Settings::resolve(&flags)?;
    let job = Job::resolve(kind, &settings, source)?;
    for (key, value) in job.params() {
        writeln!(stderr, "{key} = {value}")?;
    }
    if let Some(w) = settings.workers {
        writeln!(stderr, "workers = {w}")?;
    }
    let outcome = qnoise::mc::with_workers(settings.workers, || job.execute())??;
    let csv = outcome.table.to_csv();
    match &settings.out {
        Some(path) => output::write_atomic(path, &csv)?,
        None => stdout.write_all(csv.as_bytes())?,
    }
    match outcome.breach {
        Some(msg) => Err(CliError::Breach(msg)),
        None => Ok(()),
    }
}
