//! `kgwalk`: split a knowledge graph, train reward shapers and walking
//! agents, and evaluate them.

mod commands;
mod data;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "kgwalk", version, about = "Reward-shaped multi-hop reasoning over sparse knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask entities, then facts, of a graph into a rich/sparse pair.
    Split(commands::split::Args),
    /// Train a DistMult or ComplEx reward shaper on a graph.
    TrainShaper(commands::shaper::TrainArgs),
    /// Materialize shaper scores for a set of queries as a score table.
    ExportScores(commands::shaper::ExportArgs),
    /// Train a walking agent with binary or shaped terminal reward.
    TrainAgent(commands::agent::Args),
    /// Rank test answers with a trained agent.
    Eval(commands::eval::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Split(args) => commands::split::run(args),
        Command::TrainShaper(args) => commands::shaper::run_train(args),
        Command::ExportScores(args) => commands::shaper::run_export(args),
        Command::TrainAgent(args) => commands::agent::run(args),
        Command::Eval(args) => commands::eval::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
