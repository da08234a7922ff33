use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod data;
mod selfcheck;

use data::DataFormat;

#[derive(Parser, Debug)]
#[command(
    name = "blockcorr",
    version,
    about = "Block correlation matrices of many time series: simulation, deterministic equivalents, experiments and an uncorrelatedness test"
)]
pub struct Cli {
    /// Base seed of the random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo replications.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output directory [default: blockcorr-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON config file; its keys replace the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. --set bank.M=8.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw one ensemble and write it as CSV.
    Simulate,
    /// Solve the canonical equations on a z-grid.
    Detequiv,
    /// Pooled eigenvalue histogram against the Marchenko-Pastur density.
    Histogram {
        /// Suffix of fig1_<tag>.csv.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Error curves along the M = [(cN)^(1-beta)], L = [(cN)^beta] protocol.
    ErrorCurves {
        /// Suffix of fig2_<tag>.csv.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Monte-Carlo check of the exact mean of the oracle-normalized statistic.
    MeanIdentity,
    /// Compare the statistic of observed data with its reference value.
    Test(TestArgs),
    /// Run fast internal consistency checks.
    Selfcheck {
        #[arg(long, hide = true)]
        inject_corrupt_r: bool,
    },
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// CSV file, one series per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Lag window L.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Largest relative deviation accepted as consistent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// JSON model bank of the series, enabling the corrected reference.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(blockcorr::Error),
    /// A check or verdict did not pass; the report is already printed.
    Check(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<blockcorr::Error> for CliError {
    fn from(e: blockcorr::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
