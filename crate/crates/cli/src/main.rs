//! `dplab`: experiments on approximation in value space from the command line.
//!
//! Exit status: 0 on success, 1 on a failed result check or i/o error,
//! 2 on invalid input, 3 when an iteration does not converge.

mod adaptive_cmd;
mod config;
mod error;
mod mdp_cmd;
mod output;
mod riccati_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dplab", version, about = "Lookahead, rollout and Newton steps in dynamic programming")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Debug, Subcommand)]
enum Group {
    /// Scalar linear-quadratic problem
    #[command(subcommand)]
    Riccati(riccati_cmd::RiccatiCmd),
    /// Finite MDPs read from JSON
    #[command(subcommand)]
    Mdp(mdp_cmd::MdpCmd),
    /// Adaptive control by rollout
    #[command(subcommand)]
    Adaptive(adaptive_cmd::AdaptiveCmd),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.group {
        Group::Riccati(cmd) => riccati_cmd::run(cmd),
        Group::Mdp(cmd) => mdp_cmd::run(cmd),
        Group::Adaptive(cmd) => adaptive_cmd::run(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
