use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tarpo_cli::commands::{compare, parse_region, score, train_sim};
use tarpo_cli::config::{self, Overrides};
use tarpo_cli::error::CliError;
use tarpo_core::sim::Algorithm;

/// Environment variable capping internal parallelism.
const THREADS_VAR: &str = "TARPO_LAB_THREADS";

#[derive(Parser)]
#[command(
    name = "tarpo-lab",
    version,
    about = "Region-aware table-QA reward laboratory: transcript scoring and \
             a synthetic training environment for GRPO/TARPO comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Grpo,
    Tarpo,
    TarpoFixed,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(arg: AlgorithmArg) -> Self {
        match arg {
            AlgorithmArg::Grpo => Algorithm::Grpo,
            AlgorithmArg::Tarpo => Algorithm::Tarpo,
            AlgorithmArg::TarpoFixed => Algorithm::TarpoFixed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score transcripts against a dataset: region IoU, answer match, and
    /// the mixed reward at a given weight.
    Score {
        /// Dataset records, one JSON object per line.
        dataset: PathBuf,
        /// Transcript records, one JSON object per line.
        transcripts: PathBuf,
        /// TOML config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mixing weight for the reported mixed reward (defaults to gamma).
        #[arg(long)]
        alpha_fixed: Option<f64>,
        /// Directory for the report file; stdout only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the synthetic environment and write per-seed stats files plus
    /// a run summary.
    TrainSim {
        /// TOML config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training arm, overriding the config file.
        #[arg(long)]
        algorithm: Option<AlgorithmArg>,
        /// Single training seed, overriding the config file's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: runs/<algorithm>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Region weight of the fixed-weight arm, overriding the config.
        #[arg(long)]
        alpha_fixed: Option<f64>,
    },
    /// Compare two or more completed runs side by side.
    Compare {
        /// Run directories (or summary.json paths) to compare; the first is
        /// the baseline.
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
    },
    /// Report region declarations found in transcripts.
    ParseRegion {
        /// Transcript records, one JSON object per line.
        transcripts: PathBuf,
        /// Directory for the report file; stdout only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(()),
        Ok(value) => {
            let threads: usize =
                value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                    CliError::Config(format!(
                        "{THREADS_VAR} must be a positive integer, got {value:?}"
                    ))
                })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Config(format!("{THREADS_VAR}: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Score {
            dataset,
            transcripts,
            config,
            alpha_fixed,
            out,
        } => {
            let resolved = config::load(config.as_deref(), &Overrides::default())?;
            score::run(&dataset, &transcripts, &resolved, alpha_fixed, out.as_deref())
        }
        Command::TrainSim {
            config,
            algorithm,
            seed,
            out,
            alpha_fixed,
        } => {
            let overrides = Overrides {
                algorithm: algorithm.map(Algorithm::from),
                seed,
                alpha_fixed,
            };
            let resolved = config::load(config.as_deref(), &overrides)?;
            let out_dir = out.unwrap_or_else(|| train_sim::default_out_dir(&resolved));
            train_sim::run(&resolved, &out_dir)
        }
        Command::Compare { runs } => compare::run(&runs),
        Command::ParseRegion { transcripts, out } => {
            parse_region::run(&transcripts, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
