use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use mge_core::envs::BuiltGame;
use mge_core::finite::{solve_mge_f, MgefConfig};
use mge_core::infinite::{solve_mge_i, MgeiConfig};
use mge_core::occupancy::{
    argmax_trajectories, solve_mge_fb, write_occupancy_csv, write_trajectory_csv, FbConfig, SimplifiedGame,
};
use mge_core::trace::write_stage_csv;
use mge_core::{MarkovGame, Table};

use super::check::conditions;
use super::{check_alpha, check_epsilon, InitArg, Solver, StopArg, SweepArg};
use crate::artifacts::{substream, Run, Stream, TableSet};
use crate::failure::{CliResult, Failure};
use crate::source::GameArgs;
use crate::Command;

pub const Q_FORMAT: &str = "mge-q-tables";
pub const POLICY_FORMAT: &str = "mge-policies";

/// Mass error of an occupancy measure above which `solve` warns.
const MASS_TOL: f64 = 1e-10;

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, value_enum)]
    pub solver: Solver,
    /// Stopping threshold; the last-delta threshold for mge-fb.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Mixing weight of the inner update (mge-f) or of the backward pass
    /// (mge-fb).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sweep cap (mge-i), inner iteration cap per stage (mge-f) or number
    /// of forward-backward alternations (mge-fb).
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
    pub init: InitArg,
    /// Half-width of the uniform random initialization.
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Update order of mge-i.
    #[arg(long, value_enum, default_value_t = SweepArg::Asymmetric)]
    pub sweep: SweepArg,
    /// Stopping quantity of the mge-f inner loop.
    #[arg(long, value_enum, default_value_t = StopArg::FixedPoint)]
    pub stop_rule: StopArg,
    /// Start every mge-f stage from the initializer instead of the
    /// previous stage's iterate.
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

/// Solver configuration built from the flags; shared with `bench`.
pub struct Configs {
    pub mgei: MgeiConfig,
    pub mgef: MgefConfig,
    pub fb: FbConfig,
}

impl SolveArgs {
    pub fn configs(&self) -> CliResult<Configs> {
        let init = self.init.init(self.init_scale)?;
        let seed = substream(self.seed, Stream::Init);
        if self.max_iters == Some(0) && self.solver != Solver::MgeFb {
            return Err(Failure::usage("--max-iters must be >= 1"));
        }
        if self.alpha.is_some() && self.solver == Solver::MgeI {
            return Err(Failure::usage("--alpha applies to mge-f and mge-fb"));
        }
        let eps = self.epsilon.map(check_epsilon).transpose()?;
        let alpha = self.alpha.map(check_alpha).transpose()?.unwrap_or(1.0);
        let mgei = MgeiConfig {
            epsilon: eps.unwrap_or(MgeiConfig::default().epsilon),
            max_sweeps: self.max_iters.unwrap_or(MgeiConfig::default().max_sweeps),
            sweep_mode: self.sweep.into(),
            distinguished_agent: 0,
            seed,
            init,
        };
        let mgef = MgefConfig {
            epsilon: eps.unwrap_or(MgefConfig::default().epsilon),
            max_inner_iters: self.max_iters.unwrap_or(MgefConfig::default().max_inner_iters),
            alpha,
            seed,
            init,
            warm_start: !self.no_warm_start,
            stop_rule: self.stop_rule.into(),
        };
        let fb = FbConfig {
            iterations: self.max_iters.unwrap_or(FbConfig::default().iterations),
            init,
            seed,
            tolerance: eps.unwrap_or(FbConfig::default().tolerance),
            alpha,
        };
        Ok(Configs { mgei, mgef, fb })
    }
}

fn names(game: &MarkovGame) -> (Vec<String>, Vec<String>) {
    (game.agent_names().to_vec(), game.action_names().to_vec())
}

pub fn run(args: &SolveArgs) -> CliResult<()> {
    let cfg = args.configs()?;
    let built = args.game.load()?;
    let mut run = Run::start(&args.out)?;
    for c in conditions(&built, args.alpha.filter(|_| args.solver == Solver::MgeF))? {
        if !c.satisfied {
            run.warn(c.warning());
        }
    }
    let game_args = args.game.resolved();
    match (&built, args.solver) {
        (BuiltGame::Markov(game), Solver::MgeI) => {
            let sol = solve_mge_i(game, &cfg.mgei)?;
            run.converged = sol.trace.converged;
            sol.trace.write_csv(run.create("trace.csv")?)?;
            let q = vec![sol.q.iter().map(|q| q.values.clone()).collect()];
            let p = vec![sol.policies.iter().map(|p| p.probs.clone()).collect()];
            write_tables(&mut run, args, &game_args, names(game), false, q, p)?;
        }
        (BuiltGame::Markov(game), Solver::MgeF) => {
            let sol = solve_mge_f(game, &cfg.mgef)?;
            run.converged = sol.converged();
            let stages: Vec<usize> = (0..sol.horizon()).collect();
            write_stage_csv(&stages, &sol.traces, run.create("trace.csv")?)?;
            let q = sol
                .q_by_time
                .iter()
                .map(|per| per.iter().map(|q| q.values.clone()).collect())
                .collect();
            let p = sol
                .policies_by_time
                .iter()
                .map(|per| per.iter().map(|p| p.probs.clone()).collect())
                .collect();
            write_tables(&mut run, args, &game_args, names(game), true, q, p)?;
        }
        (BuiltGame::Simplified(sgame), Solver::MgeFb) => solve_fb(&mut run, args, &game_args, sgame, &cfg.fb)?,
        (BuiltGame::Simplified(_), _) => {
            return Err(Failure::usage(format!(
                "`{}` is an occupancy-coupled scene; use --solver mge-fb",
                args.game.game
            )))
        }
        (BuiltGame::Markov(_), Solver::MgeFb) => {
            return Err(Failure::usage(
                "mge-fb needs an occupancy-coupled scene such as `driving`",
            ))
        }
    }
    if !run.converged {
        run.warn(format!("{} did not reach the stopping threshold", args.solver.name()));
    }
    let resolved = Command::Solve(SolveArgs {
        game: game_args,
        ..args.clone()
    });
    run.finish(resolved, args.seed)?;
    Ok(())
}

fn solve_fb(
    run: &mut Run,
    args: &SolveArgs,
    game_args: &GameArgs,
    sgame: &SimplifiedGame,
    cfg: &FbConfig,
) -> CliResult<()> {
    let sol = solve_mge_fb(sgame, cfg)?;
    run.converged = sol.trace.converged;
    sol.trace.write_csv(run.create("trace.csv")?)?;
    write_occupancy_csv(&sol.occupancy, run.create("occupancy.csv")?)?;
    write_trajectory_csv(&argmax_trajectories(sgame, &sol.q), run.create("trajectories.csv")?)?;
    let worst = sol.mass_error.iter().copied().fold(0.0, f64::max);
    if worst > MASS_TOL {
        run.warn(format!("occupancy mass drifted by {worst:e}"));
    }
    // Time-major like the other solvers.
    let q: Vec<Vec<Table>> = (0..sgame.horizon)
        .map(|tau| sol.q.iter().map(|qi| qi[tau].clone()).collect())
        .collect();
    let p = (0..sgame.horizon)
        .map(|tau| (0..sgame.num_agents()).map(|i| sol.policy(sgame, i, tau)).collect())
        .collect();
    let action_names = (0..sgame.num_actions).map(|a| a.to_string()).collect();
    write_tables(
        run,
        args,
        game_args,
        (sgame.agent_names.clone(), action_names),
        true,
        q,
        p,
    )
}

fn write_tables(
    run: &mut Run,
    args: &SolveArgs,
    game: &GameArgs,
    names: (Vec<String>, Vec<String>),
    time_indexed: bool,
    q: Vec<Vec<Table>>,
    p: Vec<Vec<Table>>,
) -> CliResult<()> {
    let solver = args.solver.name();
    run.write_json(
        "q_tables.json",
        &TableSet::new(Q_FORMAT, solver, time_indexed, game, names.clone(), q),
    )?;
    run.write_json(
        "policies.json",
        &TableSet::new(POLICY_FORMAT, solver, time_indexed, game, names, p),
    )
}
