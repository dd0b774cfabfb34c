mod config;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sarclab",
    version,
    about = "Actor-critic laboratory: seed-sweep training, checkpoint evaluation, Q-Error scans and SVG training curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed; writes per-seed CSVs, an aggregate CSV,
    /// checkpoints and a manifest into the configured output dir
    Train {
        /// Config file of `key = value` lines
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trailing `--key value` (or `--key=value`) pairs overriding the
        /// file; place them after --config
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint with deterministic actions and print the result
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment name; defaults to the one recorded in the checkpoint
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the Q-Error diagnostic for every checkpoint in a directory
    Qerror {
        #[arg(long)]
        checkpoint_dir: PathBuf,
        /// Environment name; defaults to the one recorded in the checkpoints
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render curves as an SVG with mean lines and ±1 std bands
    Plot {
        /// Repeatable LABEL=PATH pairs naming curve CSVs
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, overrides } => run::cmd_train(config.as_deref(), &overrides),
        Command::Eval { checkpoint, env, episodes, seed } => {
            run::cmd_eval(&checkpoint, env.as_deref(), episodes, seed)
        }
        Command::Qerror { checkpoint_dir, env, gamma, episodes, seed, output } => {
            run::cmd_qerror(&checkpoint_dir, env.as_deref(), gamma, episodes, seed, output.as_deref())
        }
        Command::Plot { inputs, output } => plot::cmd_plot(&inputs, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
