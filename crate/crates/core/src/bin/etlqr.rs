use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use etlqr::cli::{self, CliError, RunManifest, StrategyKind};

#[derive(Parser)]
#[command(
    name = "etlqr",
    version,
    about = "Event-triggered LQR lateral control simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the triggering strategies and write CSV logs and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::All)]
        strategy: StrategyArg,
        /// Overrides the disturbance seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the gain, its certificates and the minimum inter-event time.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Time,
    EtmOriginal,
    EtmImproved,
    All,
}

impl StrategyArg {
    fn kinds(self) -> Vec<StrategyKind> {
        match self {
            StrategyArg::Time => vec![StrategyKind::TimeTriggered],
            StrategyArg::EtmOriginal => vec![StrategyKind::EtmOriginal],
            StrategyArg::EtmImproved => vec![StrategyKind::EtmImproved],
            StrategyArg::All => StrategyKind::ALL.to_vec(),
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            out,
            strategy,
            seed,
        } => {
            let mut scenario = cli::load_config(&config)?;
            if let Some(seed) = seed {
                scenario = scenario.with_seed(seed);
            }
            let manifest = RunManifest {
                config_path: Some(config),
                output_directory: out,
                strategies: strategy.kinds(),
            };
            let rows = cli::run_comparison(&scenario, &manifest)?;
            print!("{}", cli::format_summary(&rows));
            println!("wrote {}", manifest.output_directory.display());
        }
        Command::Certify { config } => {
            let scenario = cli::load_config(&config)?;
            let (plant, syn) = cli::prepare(&scenario)?;
            print!("{}", cli::emit_certificate(&plant, &syn));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("etlqr: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
