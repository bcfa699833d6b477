use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pipegrad::commands;
use pipegrad::config::load_config;

/// Train classical tabular pipelines, compile them into differentiable
/// networks, and fine-tune the result with backpropagation.
#[derive(Parser)]
#[command(name = "pipegrad", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override config keys by dotted path, e.g. --set gbdt.num_trees=30.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the scenario's classical pipeline and report its AUC.
    Fit(ConfigArgs),
    /// Compile a fitted pipeline into a differentiable network; verify
    /// fidelity and report parameter counts.
    Translate(ConfigArgs),
    /// Fine-tune a network checkpoint; write the best checkpoint and the
    /// training history.
    Finetune(ConfigArgs),
    /// AUC and logloss of a pipeline or checkpoint on one dataset split.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Artifact to evaluate (pipeline.json or a net checkpoint).
        #[arg(long)]
        artifact: PathBuf,
        /// Dataset split: train, valid or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// One-command comparison: classical vs warm-tuned vs cold-tuned vs MLP.
    Compare(ConfigArgs),
    /// Write the bundled synthetic fixture (CSVs + schema).
    Fixture {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Training rows (valid/test get a fifth each).
        #[arg(long, default_value_t = 4000)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run() -> Result<(), pipegrad::CliError> {
    match Cli::parse().command {
        Command::Fit(args) => {
            let cfg = load_config(&args.config, &args.sets, args.out.as_deref())?;
            commands::cmd_fit(&cfg)
        }
        Command::Translate(args) => {
            let cfg = load_config(&args.config, &args.sets, args.out.as_deref())?;
            commands::cmd_translate(&cfg)
        }
        Command::Finetune(args) => {
            let cfg = load_config(&args.config, &args.sets, args.out.as_deref())?;
            commands::cmd_finetune(&cfg)
        }
        Command::Eval {
            config,
            artifact,
            split,
        } => {
            let cfg = load_config(&config.config, &config.sets, config.out.as_deref())?;
            commands::cmd_eval(&cfg, &artifact, &split)
        }
        Command::Compare(args) => {
            let cfg = load_config(&args.config, &args.sets, args.out.as_deref())?;
            commands::cmd_compare(&cfg)
        }
        Command::Fixture { out, rows, seed } => commands::cmd_fixture(&out, rows, seed),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
