//! `gazekit`: simulate, label, train, evaluate and adapt gaze regressors.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AdaptArgs, AttentionArgs, EvalArgs, LabelArgs, ReportArgs, SimulateArgs, TrainArgs};

#[derive(Parser, Debug)]
#[command(name = "gazekit", version, about = "Synthetic gaze dataset and regressor toolkit")]
struct Cli {
    /// Overrides the seed of every configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate recording sessions and write a subject-split dataset.
    Simulate(SimulateArgs),
    /// Run the labelling pipeline on recorded detections.
    Label(LabelArgs),
    /// Train a regressor on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint and draw figures.
    Eval(EvalArgs),
    /// Adapt a source-trained checkpoint to an unlabeled target domain.
    Adapt(AdaptArgs),
    /// Shelf attention map from simulated shoppers.
    Attention(AttentionArgs),
    /// Collect evaluation reports into one table.
    Report(ReportArgs),
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<gazekit_core::Error> for CliError {
    fn from(e: gazekit_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.into())
        } else {
            CliError::Runtime(e.into())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(a, cli.seed),
        Command::Label(a) => commands::label(a, cli.seed),
        Command::Train(a) => commands::train_cmd(a, cli.seed),
        Command::Eval(a) => commands::eval(a, cli.seed),
        Command::Adapt(a) => commands::adapt(a, cli.seed),
        Command::Attention(a) => commands::attention(a, cli.seed),
        Command::Report(a) => commands::report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Config(inner) | CliError::Runtime(inner)) = &e;
            eprintln!("error: {inner:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
