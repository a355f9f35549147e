//! `billiards`: command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure or failed
//! check, 4 negative conjugacy verdict, 1 I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convex_billiards::Error;

use config::Config;
use output::{Format, Profile};

#[derive(Parser, Debug)]
#[command(name = "billiards", version, about = "Near-boundary dynamics of convex billiards")]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Format of the data tables; the report is always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write a layered SVG plot.
    #[arg(long, global = true)]
    svg: bool,
    /// Seed for sampled probe points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Profile::Default)]
    tolerance_profile: Profile,
    /// Override a configuration key, e.g. `-D orbit.steps=500`.
    #[arg(short = 'D', long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Tabulate the boundary: position, curvature, Lazutkin parameter.
    Curve,
    /// Iterate the billiard map from one phase point.
    Orbit,
    /// Build the invariant series and fit its invariance defect.
    Series,
    /// Base and perturbed foliations with their caustic ladders.
    Foliate,
    /// Caustic ladder of the base foliation.
    Caustics,
    /// Decide conjugacy of two boundary billiards.
    Conjugacy,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(
                Error::Validation(_) | Error::DegenerateSpec(_) | Error::OrderTooHigh(_) | Error::NonConvex { .. } | Error::OutOfDomain { .. },
            ) => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub enum Outcome {
    Success,
    ChecksFailed,
    Negative,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.set(s)?;
    }
    let name = match cli.command {
        Command::Curve => "curve",
        Command::Orbit => "orbit",
        Command::Series => "series",
        Command::Foliate => "foliate",
        Command::Caustics => "caustics",
        Command::Conjugacy => "conjugacy",
    };
    let mut ctx = commands::Ctx::new(name, cfg, cli.out, cli.format, cli.svg, cli.seed, cli.tolerance_profile);
    let negative = match cli.command {
        Command::Curve => commands::curve(&mut ctx)?,
        Command::Orbit => commands::orbit(&mut ctx)?,
        Command::Series => commands::series(&mut ctx)?,
        Command::Foliate => commands::ladder(&mut ctx, true)?,
        Command::Caustics => commands::ladder(&mut ctx, false)?,
        Command::Conjugacy => commands::conjugacy(&mut ctx)?,
    };
    ctx.finish()?;
    Ok(if negative {
        Outcome::Negative
    } else if !ctx.report.all_pass() {
        Outcome::ChecksFailed
    } else {
        Outcome::Success
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(3),
        Ok(Outcome::Negative) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
