//! `ocon`: ingest formant tables, train and search One-Class-One-Network
//! ensembles, evaluate, infer and profile them.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 training failure.

mod commands;
mod data;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{eval, infer, ingest, profile, search, train, RunInfo};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ocon", version, about = "One-Class-One-Network vowel and speaker classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Ingest(ingest::IngestArgs),
    Train(train::TrainArgs),
    Search(search::SearchArgs),
    Eval(eval::EvalArgs),
    Infer(infer::InferArgs),
    Profile(profile::ProfileArgs),
}

pub fn dispatch(command: &Command) -> Result<RunInfo, CliError> {
    match command {
        Command::Ingest(a) => ingest::run(a),
        Command::Train(a) => train::run(a),
        Command::Search(a) => search::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Infer(a) => infer::run(a),
        Command::Profile(a) => profile::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
