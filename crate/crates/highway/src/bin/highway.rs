use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use highway::commands;

#[derive(Parser)]
#[command(name = "highway", about = "Highway overtaking simulator and RL training harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics, checkpoints, and final weights
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate stored weights (or the rule-based reference) greedily
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one traced episode under a policy ("reference" or a weights path)
    Rollout {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "reference")]
        policy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Train DQN and DDQN across seeds and compare with the reference model
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seed, out } => commands::cmd_train(&config, seed, &out),
        Command::Eval {
            config,
            weights,
            episodes,
            seed,
            out,
        } => commands::cmd_eval(&config, weights.as_deref(), episodes, seed, out.as_deref()),
        Command::Rollout {
            config,
            policy,
            seed,
            trace,
        } => commands::cmd_rollout(&config, &policy, seed, &trace),
        Command::Compare { config, seeds, out } => commands::cmd_compare(&config, &seeds, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
