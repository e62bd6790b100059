//! Command-line front end for sweeps, figure data, fringe fits, tomography and
//! the numerical self-checks.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use commands::{ScanArgs, TomographyArgs};
use config::MethodArg;
use std::path::PathBuf;
use std::process::ExitCode;
use stimpair::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    /// Plain report; `verify` only.
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "stimpair", version, about = "Stimulated entangled-pair source: model, simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON parameter block for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Expected counts per scan point or per tomography setting.
    #[arg(long, global = true, default_value_t = 1e5)]
    shots: f64,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair probabilities over pass counts and round-trip phases.
    SweepPhase,
    /// Simulated coincidence counts against plate tilt, with fringe fit.
    Fig4 {
        /// Where to write the fit JSON.
        #[arg(long)]
        fit_out: Option<PathBuf>,
        /// Fit this scan CSV instead of simulating one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Simulated polarization fringe, with fringe fit.
    Fringe {
        #[arg(long)]
        fit_out: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Simulate or ingest a 16-setting record and reconstruct the state.
    Tomography {
        /// Counts file (JSON list of {arm_a, arm_b, counts}).
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Also write the simulated record here.
        #[arg(long)]
        record_out: Option<PathBuf>,
    },
    /// N_S^n / N_C rate estimates.
    Rates {
        #[arg(long)]
        singles: Option<f64>,
        #[arg(long)]
        coincidences: Option<f64>,
        #[arg(long)]
        n: Option<u32>,
    },
    /// Run the numerical self-checks.
    Verify {
        /// Run only this check; repeatable.
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Print the check names and exit.
        #[arg(long)]
        list: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_validation() => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

fn run(cli: Cli) -> stimpair::Result<bool> {
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match cli.command {
        Command::SweepPhase => {
            let cfg: config::SweepConfig = config::load(config)?;
            commands::sweep_phase(&cfg, cli.format.unwrap_or(Format::Csv), out)?;
        }
        Command::Fig4 { fit_out, input } => {
            let cfg: config::Fig4Config = config::load(config)?;
            let args = ScanArgs {
                seed: cli.seed,
                shots: cli.shots,
                format: cli.format.unwrap_or(Format::Csv),
                out,
                fit_out: fit_out.as_deref(),
                input: input.as_deref(),
            };
            commands::fig4(&cfg, &args)?;
        }
        Command::Fringe { fit_out, input } => {
            let cfg: config::FringeConfig = config::load(config)?;
            let args = ScanArgs {
                seed: cli.seed,
                shots: cli.shots,
                format: cli.format.unwrap_or(Format::Csv),
                out,
                fit_out: fit_out.as_deref(),
                input: input.as_deref(),
            };
            commands::fringe(&cfg, &args)?;
        }
        Command::Tomography { counts, method, record_out } => {
            let mut cfg: config::TomographyConfig = config::load(config)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            let args = TomographyArgs {
                seed: cli.seed,
                shots: cli.shots,
                format: cli.format.unwrap_or(Format::Json),
                out,
                counts: counts.as_deref(),
                record_out: record_out.as_deref(),
            };
            commands::tomography(&cfg, &args)?;
        }
        Command::Rates { singles, coincidences, n } => {
            let mut cfg: config::RatesConfig = config::load(config)?;
            if singles.is_some() || coincidences.is_some() {
                // Explicit inputs replace the reference values entirely.
                cfg.reported_pair_rate = None;
            }
            cfg.singles = singles.unwrap_or(cfg.singles);
            cfg.coincidences = coincidences.unwrap_or(cfg.coincidences);
            cfg.n = n.unwrap_or(cfg.n);
            commands::rates(&cfg, cli.format.unwrap_or(Format::Json), out)?;
        }
        Command::Verify { checks, list } => {
            return commands::verify(&checks, list, cli.format.unwrap_or(Format::Text), out);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
