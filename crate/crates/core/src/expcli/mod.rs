//! Experiment harness behind the `ris-see` binary.
//!
//! ```text
//! ris-see run --config sweep.json --out results.csv [--threads 4] [--scale desk|paper] [--timing]
//! ris-see validate --config sweep.json [--scale desk|paper]
//! ```
//!
//! `RIS_SEE_SEED` in the environment replaces the configured seed.

mod config;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{ExperimentConfig, Method, MethodSpec, Overrides, Scale};
pub use sweep::{fmt_sig, init_seed, run_sweep, to_csv, write_csv, DropInfo, SweepOutput, SweepRow, CSV_HEADER};

pub const SEED_ENV: &str = "RIS_SEE_SEED";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ris-see", about = "Secrecy energy efficiency sweeps for RIS-aided uplinks")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Scenario size; overrides the config file.
    #[arg(long, global = true, value_enum)]
    scale: Option<ScaleArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sweep and write one CSV row per (budget, method, drop).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Record wall-clock runtimes (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Print every resolved parameter and all invariant violations.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn seed_from_env() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("{SEED_ENV}='{s}' is not a nonnegative integer")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("{SEED_ENV}: {e}")),
    }
}

/// Entry point of the binary. Exit codes: 0 success, 1 invalid config
/// (validate) or output failure (run), 2 unreadable or invalid input.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let seed = match seed_from_env() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides { scale: cli.scale.map(Scale::from), seed };

    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config, overrides) {
            Ok(cfg) => {
                print!("{}", cfg.report());
                if cfg.violations().is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, timing } => {
            let cfg = match ExperimentConfig::load(&config, overrides).and_then(|c| c.validate().map(|_| c)) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let result = match run_sweep(&cfg, cli.threads) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let failed = result.rows.iter().filter(|r| r.result.is_err()).count();
            if let Err(e) = write_csv(&out, &cfg, &result, timing) {
                eprintln!("error: cannot write {}: {e}", out.display());
                return ExitCode::from(1);
            }
            eprintln!(
                "wrote {} rows to {} ({failed} failed)",
                result.rows.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
    }
}
