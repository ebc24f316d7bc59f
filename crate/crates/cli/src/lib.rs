//! Command-line orchestration for relaxlab: configuration, subcommands and
//! the on-disk report layout.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

use relaxlab::Error;

use crate::config::{Cli, CommandKind, RunConfig};
use crate::output::OutputDir;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Invalid input or configuration; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Sorts library errors into configuration problems and numerical failures.
pub fn core_error(e: Error) -> anyhow::Error {
    match e {
        Error::UnknownBuiltin(_)
        | Error::InvalidParams { .. }
        | Error::Subcharacteristic { .. }
        | Error::Dimension(_)
        | Error::NotSpd(_)
        | Error::Hypothesis(_)
        | Error::GridTooSmall(_)
        | Error::CutoffTooLarge(_)
        | Error::TimeStep { .. }
        | Error::MissingNonlinearity
        | Error::Unsupported(_)
        | Error::Format(_)
        | Error::Io(_) => UsageError(e.to_string()).into(),
        _ => anyhow::Error::new(e),
    }
}

/// Caps the worker pool when `RELAXLAB_THREADS` is set.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("RELAXLAB_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("RELAXLAB_THREADS must be a positive integer, got `{value}`")))?;
    // A pool built earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs one subcommand and reports whether its checks passed.
pub fn execute(cli: Cli) -> anyhow::Result<bool> {
    configure_threads()?;
    let (kind, opts) = cli.command.split();
    let cfg = RunConfig::resolve(kind, opts)?;
    let mut out = OutputDir::create(&cfg.out).map_err(|e| UsageError(format!("{e:#}")))?;
    let outcome = match kind {
        CommandKind::Analyze => commands::analyze(&cfg, &mut out)?,
        CommandKind::Kernel => commands::kernel(&cfg, &mut out)?,
        CommandKind::Simulate => commands::simulate_cmd(&cfg, &mut out)?,
        CommandKind::Compare => commands::compare(&cfg, &mut out)?,
        CommandKind::Report => commands::report(&cfg, &mut out)?,
    };
    print!("{}", outcome.text);
    let manifest = out.finish()?;
    println!("manifest: {}", manifest.display());
    Ok(outcome.pass)
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_CHECK_FAILED
        }
    }
}
