//! Command-line front end of the cvq simulator.
//!
//! [`run`] parses arguments, merges an optional `--config` file and dispatches
//! to the subcommands. Every run writes a JSON manifest next to its outputs;
//! errors are reported on one line as `error[CODE]: message`.

pub mod args;
mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use crate::args::Cli;

/// Exit status for unknown flags, subcommands or malformed arguments.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for parameter validation and numerical failures.
pub const EXIT_INVALID: i32 = 2;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CVQ_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: "E_USAGE",
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: EXIT_INVALID,
        }
    }

    pub fn line(&self) -> String {
        let msg: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.code, msg.join(" "))
    }
}

impl From<cvq_core::Error> for CliError {
    fn from(e: cvq_core::Error) -> Self {
        CliError::invalid(e.code(), e.to_string())
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let result = config::merge_config(argv).and_then(|argv| match Cli::try_parse_from(argv) {
        Ok(cli) => commands::dispatch(cli.command, stdout),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp
            | clap::error::ErrorKind::DisplayVersion
            | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = write!(stdout, "{}", e.render());
                Ok(())
            }
            _ => {
                let text = e.render().to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                Err(CliError::usage(first.trim_start_matches("error: ")))
            }
        },
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.line());
            e.exit
        }
    }
}
