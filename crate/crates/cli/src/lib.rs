//! Command-line driver: argument parsing, command dispatch and output rendering.

pub mod args;
mod commands;
mod report;

use std::io::Write;

pub use args::Cli;
pub use commands::VERSION;

/// Exit status for malformed command lines.
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    /// Bad parameters or inputs.
    Domain(String),
    /// A numerical procedure failed.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<quadvar_core::Error> for CliError {
    fn from(e: quadvar_core::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A finished command: the table, the document and a one-line summary.
pub struct Output {
    pub csv: String,
    pub json: serde_json::Value,
    pub summary: String,
}

/// Runs the command and returns what it would print to standard output
/// (empty when `--out` names a file) together with the summary line.
pub fn render(cli: &Cli) -> CliResult<(Vec<u8>, String)> {
    let out = commands::dispatch(&cli.command)?;
    let common = cli.command.output();
    let mut text = match common.format.unwrap_or_else(|| cli.command.default_format()) {
        args::Format::Csv => out.csv,
        args::Format::Json => serde_json::to_string_pretty(&out.json).expect("JSON values serialize"),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &common.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok((Vec::new(), out.summary))
        }
        None => Ok((text.into_bytes(), out.summary)),
    }
}

/// Parses `argv` (program name first), runs it and writes to the process streams.
/// Returns the exit status.
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let written = render(&cli).and_then(|(bytes, summary)| {
        std::io::stdout().lock().write_all(&bytes)?;
        Ok(summary)
    });
    match written {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
