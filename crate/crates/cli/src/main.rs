use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod cli;
mod commands;
mod config;
mod error;
mod manifest;

use cli::{Cli, Command};
use commands::Ctx;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let ctx = Ctx { data_dir: cli.data_dir.clone() };
    let result = match &cli.command {
        Command::Preprocess(a) => commands::preprocess_cmd(&ctx, a),
        Command::Synth(a) => commands::synth_cmd(&ctx, a),
        Command::Graphs(a) => commands::graphs_cmd(&ctx, a),
        Command::Train(a) => commands::train_cmd(&ctx, a),
        Command::Eval(a) => commands::eval_cmd(&ctx, a),
        Command::Ablate(a) => commands::ablate_cmd(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
