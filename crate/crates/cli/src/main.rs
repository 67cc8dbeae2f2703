mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use subst_core::corpus::Split;

use commands::Ranker;
use config::{parse_seeds, RunConfig, SeedList};

#[derive(Parser)]
#[command(name = "subst", version, about = "Train and evaluate ingredient substitution models")]
struct Cli {
    /// JSON run configuration (model hyperparameters plus data paths).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key; VALUE is parsed as JSON when possible.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,

    /// Comma-separated seed list; replaces `seeds` from the config.
    #[arg(long, value_name = "N[,N...]", value_parser = parse_seeds, global = true)]
    seed: Option<SeedList>,

    /// Output directory; replaces `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine substitution tuples from recipe comments.
    Extract,
    /// Train one model per seed with early stopping on validation MRR.
    Train,
    /// Evaluate a checkpoint or a baseline on a split.
    Eval {
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        /// random, mode, freq, lt, lt+freq or embedding
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Rank substitutes for one ingredient of a recipe.
    Suggest {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSON object with `ingredients` and optional `title`, `title_embedding`.
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Fit a baseline on the training split and evaluate it.
    Baseline {
        name: String,
        #[arg(long, default_value = "test")]
        split: Split,
    },
}

fn run(cli: Cli) -> subst_core::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set, cli.seed.map(|s| s.0), cli.out)?;
    match cli.command {
        Command::Extract => commands::extract(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval {
            checkpoint,
            baseline,
            split,
        } => {
            let ranker = match (checkpoint, baseline) {
                (Some(c), _) => Ranker::Checkpoint(c),
                (None, Some(b)) => Ranker::Baseline(b),
                (None, None) => unreachable!("clap requires one of them"),
            };
            commands::eval(&cfg, &ranker, split)
        }
        Command::Suggest {
            checkpoint,
            recipe,
            source,
            top_k,
        } => commands::suggest(&cfg, &checkpoint, &recipe, &source, top_k),
        Command::Baseline { name, split } => commands::eval(&cfg, &Ranker::Baseline(name), split),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
