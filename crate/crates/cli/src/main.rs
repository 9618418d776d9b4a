//! `stockgan`: train, evaluate and compare the baseline LSTM and GAN
//! forecasters from the command line.
//!
//! Exit status: 0 success, 1 I/O failure, 2 configuration error, 3 data
//! error, 4 training divergence.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
        Command::Compare(a) => commands::cmd_compare(a),
        Command::Plotdata(a) => commands::cmd_plotdata(a),
        Command::Fetch(a) => commands::cmd_fetch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
