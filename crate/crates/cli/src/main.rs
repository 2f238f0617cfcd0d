//! `mge`: solve Boltzmann-equilibrium Markov games, roll out the solved
//! policies, fit opponents' rewards from trajectories and sweep solver
//! settings. Every command writes plot-ready CSV/JSON plus a
//! `manifest.json` from which `mge replay` re-runs it.
//!
//! Exit codes: 0 success (also for runs that did not converge; the
//! manifest flags them), 2 usage, 3 input validation, 4 internal.

mod artifacts;
mod commands;
mod failure;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{
    bench::BenchArgs, check::CheckArgs, irl::IrlArgs, replay::ReplayArgs, rollout::RolloutArgs, solve::SolveArgs,
};
use failure::{CliResult, ExitKind};

#[derive(Parser, Debug)]
#[command(name = "mge", version, about = "Boltzmann-equilibrium solvers for Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Solve a game with MGE-I, MGE-F or MGE-FB.
    Solve(SolveArgs),
    /// Execute solved policies and score the episodes.
    Rollout(RolloutArgs),
    /// Fit the other agents' reward weights to observed trajectories.
    Irl(IrlArgs),
    /// Run a solver over a grid of alpha, beta, reward scale and seed.
    Bench(BenchArgs),
    /// Validate a game and evaluate the convergence conditions.
    Check(CheckArgs),
    /// Re-run the command recorded in a manifest and compare the outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn run(&self) -> CliResult<()> {
        match self {
            Command::Solve(a) => commands::solve::run(a),
            Command::Rollout(a) => commands::rollout::run(a),
            Command::Irl(a) => commands::irl::run(a),
            Command::Bench(a) => commands::bench::run(a),
            Command::Check(a) => commands::check::run(a),
            Command::Replay(a) => commands::replay::run(a),
        }
    }

    /// The same command writing into `out`.
    pub fn with_out(&self, out: PathBuf) -> Command {
        let mut c = self.clone();
        match &mut c {
            Command::Solve(a) => a.out = out,
            Command::Rollout(a) => a.out = out,
            Command::Irl(a) => a.out = out,
            Command::Bench(a) => a.out = out,
            Command::Check(a) => a.out = out,
            Command::Replay(a) => a.out = Some(out),
        }
        c
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitKind::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.kind as u8)
        }
    }
}
