use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwl_cli::{run, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "rwl", version, about = "Riesz transform and wavelet projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample the decay, Hoelder and sectional conditions (never gates).
    VerifyAdmissible,
    /// Completeness checks and the Littlewood-Paley pieces of test fields.
    Decompose,
    /// Norms of T_l and T_l R^-1 against l.
    ScanTell,
    /// Norms of the Haar shift rearrangements.
    ScanSemenov,
    /// Norms of the predecessor transfer against lambda.
    ScanPredecessor,
    /// Interpolation ratios over the test suite.
    InterpCheck,
    /// Partial coercivity constants over the test suite.
    Coercivity,
    /// Algebraic identities and the Riesz representation.
    IdentityCheck,
    /// Every stage in order.
    All,
    /// Print the effective configuration as JSON.
    ShowConfig,
}

impl Command {
    fn stages(self) -> Vec<Stage> {
        match self {
            Command::VerifyAdmissible => vec![Stage::VerifyAdmissible],
            Command::Decompose => vec![Stage::Decompose],
            Command::ScanTell => vec![Stage::ScanTell],
            Command::ScanSemenov => vec![Stage::ScanSemenov],
            Command::ScanPredecessor => vec![Stage::ScanPredecessor],
            Command::InterpCheck => vec![Stage::InterpCheck],
            Command::Coercivity => vec![Stage::Coercivity],
            Command::IdentityCheck => vec![Stage::IdentityCheck],
            Command::All => Stage::ALL.to_vec(),
            Command::ShowConfig => Vec::new(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                log::error!("{e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Command::ShowConfig = cli.command {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    match run(&cli.command.stages(), cfg, cli.workers) {
        Ok(outcome) => {
            for (stage, c) in outcome.failed_checks() {
                log::error!("{stage}: {} = {:e} exceeds {:e}", c.name, c.value, c.bound);
            }
            println!("{}", outcome.out_dir.join("report.json").display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
