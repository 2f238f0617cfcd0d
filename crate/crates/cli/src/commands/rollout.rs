use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mge_core::boltzmann::PolicyTable;
use mge_core::envs::{events_for, BuiltGame};
use mge_core::rollout::{
    run_rollouts, score_summary, Execution, InitialState, PolicySchedule, RolloutConfig, RolloutReport, ScoreSummary,
};

use super::solve::POLICY_FORMAT;
use crate::artifacts::{substream, Run, Stream, TableSet};
use crate::failure::{input_error, CliResult, Failure};
use crate::Command;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecArg {
    Argmax,
    Sample,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutArgs {
    /// `policies.json` written by `mge solve`.
    #[arg(long)]
    pub policies: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    #[arg(long = "exec", value_enum, default_value_t = ExecArg::Argmax)]
    pub execution: ExecArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Episode length; required for discounted games.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Fixed starting placement; otherwise drawn from the game's initial
    /// distribution.
    #[arg(long, value_delimiter = ',')]
    pub start: Option<Vec<usize>>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Report<'a> {
    summary: ScoreSummary,
    #[serde(flatten)]
    report: &'a RolloutReport,
}

pub fn run(args: &RolloutArgs) -> CliResult<()> {
    if args.episodes == 0 {
        return Err(Failure::usage("--episodes must be >= 1"));
    }
    let set = TableSet::read(&args.policies, POLICY_FORMAT)?;
    let game = match set.game.load()? {
        BuiltGame::Markov(g) => g,
        BuiltGame::Simplified(_) => {
            return Err(Failure::input(
                "rollouts need a Markov game; occupancy-coupled scenes have none",
            ))
        }
    };
    let to_policies = |per: &Vec<mge_core::Table>| -> Vec<PolicyTable> {
        per.iter()
            .enumerate()
            .map(|(i, p)| PolicyTable {
                agent: i,
                time_step: None,
                probs: p.clone(),
            })
            .collect()
    };
    let schedule = if set.time_indexed {
        PolicySchedule::TimeIndexed(set.tables.iter().map(to_policies).collect())
    } else {
        let first = set
            .tables
            .first()
            .ok_or_else(|| Failure::input("policy file holds no tables"))?;
        PolicySchedule::Stationary(to_policies(first))
    };
    let cfg = RolloutConfig {
        execution: match args.execution {
            ExecArg::Argmax => Execution::Argmax,
            ExecArg::Sample => Execution::Sample,
        },
        episodes: args.episodes,
        seed: substream(args.seed, Stream::Rollout),
        initial_state: match &args.start {
            Some(c) => InitialState::Fixed(c.clone()),
            None => InitialState::RandomFromP0,
        },
        steps: args.steps,
    };
    let detectors = set.game.builtin_name().map(events_for).unwrap_or_default();
    let report = run_rollouts(&game, &schedule, &cfg, &detectors).map_err(input_error)?;
    let mut run = Run::start(&args.out)?;
    run.write_json(
        "report.json",
        &Report {
            summary: score_summary(&report)?,
            report: &report,
        },
    )?;
    report
        .to_trajectory_log()
        .write_jsonl(run.create("trajectories.jsonl")?)?;
    let resolved = RolloutArgs {
        policies: args.policies.canonicalize()?,
        ..args.clone()
    };
    run.finish(Command::Rollout(resolved), args.seed)?;
    Ok(())
}
