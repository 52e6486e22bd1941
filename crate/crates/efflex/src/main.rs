use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use efflex::cli::{self, SweepAxis};

#[derive(Parser)]
#[command(
    name = "efflex",
    about = "Trajectory embeddings from multi-scale KNN graphs and a lightweight GCN",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config (JSON). `{}` selects every default.
    #[arg(long)]
    config: PathBuf,
    /// Override config values, e.g. --set train.epochs=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse or generate the dataset, preprocess it, and write the canonical file
    Ingest(ConfigArgs),
    /// Compute one pairwise distance matrix per configured kind
    Distances(ConfigArgs),
    /// Build the multi-scale graph and train the embedding model
    Train(ConfigArgs),
    /// Score embeddings with HR@10 / HR@50 / R10@50 and write the report
    Evaluate(ConfigArgs),
    /// Compare predicted vs ground-truth top-k for one query trajectory
    Query {
        #[command(flatten)]
        config: ConfigArgs,
        /// Query trajectory id
        #[arg(long)]
        id: usize,
        /// How many neighbors to retrieve
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Run an ablation grid along one axis and write a CSV of metric curves
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        axis: SweepAxis,
    },
    /// Write a default config file to get started
    InitConfig {
        #[arg(long, default_value = "efflex.json")]
        path: PathBuf,
    },
}

fn run() -> efflex::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => cli::cmd_ingest(&cli::load_config(&args.config, &args.set)?),
        Command::Distances(args) => cli::cmd_distances(&cli::load_config(&args.config, &args.set)?),
        Command::Train(args) => cli::cmd_train(&cli::load_config(&args.config, &args.set)?),
        Command::Evaluate(args) => cli::cmd_evaluate(&cli::load_config(&args.config, &args.set)?),
        Command::Query { config, id, k } => {
            cli::cmd_query(&cli::load_config(&config.config, &config.set)?, id, k)
        }
        Command::Sweep { config, axis } => {
            cli::cmd_sweep(&cli::load_config(&config.config, &config.set)?, axis)
        }
        Command::InitConfig { path } => cli::write_default_config(&path),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
