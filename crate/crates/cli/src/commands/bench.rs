//! Grid sweeps. `sweep.csv` has one row per (cell, stage, iteration) with
//! columns `cell,alpha,beta,reward_scale,seed,stage,iteration,residual`;
//! stage is 0 for the stationary and forward-backward solvers.
//! `bench_summary.json` compares every cell's solution with the first cell.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mge_core::boltzmann::argmax_with_tolerance;
use mge_core::envs::BuiltGame;
use mge_core::finite::solve_mge_f;
use mge_core::infinite::solve_mge_i;
use mge_core::occupancy::solve_mge_fb;
use mge_core::rollout::ARGMAX_TIE_TOL;
use mge_core::trace::fmt_f64;
use mge_core::Table;

use super::solve::SolveArgs;
use super::{InitArg, Solver, StopArg, SweepArg};
use crate::artifacts::Run;
use crate::failure::{CliResult, Failure};
use crate::source::GameArgs;
use crate::Command;

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, value_enum)]
    pub solver: Solver,
    /// Mixing weights to sweep (mge-f, mge-fb).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Inverse temperatures to sweep; the game's own by default.
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Reward multipliers to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub reward_scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = InitArg::Zeros)]
    pub init: InitArg,
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    #[arg(long, value_enum, default_value_t = StopArg::FixedPoint)]
    pub stop_rule: StopArg,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Cell {
    alpha: Option<f64>,
    beta: Option<f64>,
    reward_scale: f64,
    seed: u64,
}

struct CellRun {
    /// `(stage, iteration, residual)`.
    rows: Vec<(usize, usize, f64)>,
    q: Vec<Table>,
    policies: Vec<Table>,
    converged: bool,
}

#[derive(Serialize)]
struct CellSummary {
    #[serde(flatten)]
    cell: Cell,
    converged: bool,
    iterations: usize,
    /// Sup distance of the Q tables to those of the first cell.
    max_q_distance: f64,
    /// States where the most probable action differs from the first cell.
    argmax_mismatches: usize,
}

fn solve_cell(args: &BenchArgs, cell: &Cell) -> CliResult<CellRun> {
    let solve = SolveArgs {
        game: GameArgs {
            beta: cell.beta.or(args.game.beta),
            ..args.game.clone()
        },
        solver: args.solver,
        epsilon: args.epsilon,
        alpha: cell.alpha,
        max_iters: args.max_iters,
        seed: cell.seed,
        init: args.init,
        init_scale: args.init_scale,
        sweep: SweepArg::Asymmetric,
        stop_rule: args.stop_rule,
        no_warm_start: false,
        out: args.out.clone(),
    };
    let cfg = solve.configs()?;
    let flat = |per: &[Vec<Table>]| per.iter().flatten().cloned().collect::<Vec<_>>();
    Ok(match (solve.game.load()?, args.solver) {
        (BuiltGame::Markov(game), Solver::MgeI) => {
            let sol = solve_mge_i(&game.with_scaled_rewards(cell.reward_scale), &cfg.mgei)?;
            CellRun {
                rows: sol
                    .trace
                    .residuals
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (0, k + 1, *r))
                    .collect(),
                q: sol.q.into_iter().map(|q| q.values).collect(),
                policies: sol.policies.into_iter().map(|p| p.probs).collect(),
                converged: sol.trace.converged,
            }
        }
        (BuiltGame::Markov(game), Solver::MgeF) => {
            let sol = solve_mge_f(&game.with_scaled_rewards(cell.reward_scale), &cfg.mgef)?;
            let rows = sol
                .traces
                .iter()
                .enumerate()
                .flat_map(|(tau, t)| t.residuals.iter().enumerate().map(move |(k, r)| (tau, k + 1, *r)))
                .collect();
            CellRun {
                rows,
                converged: sol.converged(),
                q: sol.q_by_time.into_iter().flatten().map(|q| q.values).collect(),
                policies: sol.policies_by_time.into_iter().flatten().map(|p| p.probs).collect(),
            }
        }
        (BuiltGame::Simplified(mut sgame), Solver::MgeFb) => {
            for r in sgame.rewards.iter_mut() {
                *r = r.scaled(cell.reward_scale);
            }
            for f in sgame.final_rewards.iter_mut() {
                f.iter_mut().for_each(|v| *v *= cell.reward_scale);
            }
            let sol = solve_mge_fb(&sgame, &cfg.fb)?;
            let policies = (0..sgame.num_agents())
                .flat_map(|i| (0..sgame.horizon).map(move |tau| (i, tau)))
                .map(|(i, tau)| sol.policy(&sgame, i, tau))
                .collect();
            CellRun {
                rows: sol
                    .trace
                    .residuals
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (0, k + 1, *r))
                    .collect(),
                converged: sol.trace.converged,
                q: flat(&sol.q),
                policies,
            }
        }
        _ => return Err(Failure::usage("solver does not match the game kind")),
    })
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    if args.reward_scales.is_empty() || args.seeds.is_empty() {
        return Err(Failure::usage("the sweep grid is empty"));
    }
    if let Some(s) = args.reward_scales.iter().find(|s| !s.is_finite()) {
        return Err(Failure::usage(format!("reward scale {s} is not finite")));
    }
    if !args.alphas.is_empty() && args.solver == Solver::MgeI {
        return Err(Failure::usage("--alphas applies to mge-f and mge-fb"));
    }
    let alphas: Vec<Option<f64>> = if args.alphas.is_empty() {
        vec![None]
    } else {
        args.alphas.iter().copied().map(Some).collect()
    };
    let betas: Vec<Option<f64>> = if args.betas.is_empty() {
        vec![None]
    } else {
        args.betas.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            for &reward_scale in &args.reward_scales {
                for &seed in &args.seeds {
                    cells.push(Cell {
                        alpha,
                        beta,
                        reward_scale,
                        seed,
                    });
                }
            }
        }
    }
    // Validate the shared flags once before fanning out.
    check_grid(args)?;
    let runs: Vec<CellRun> = cells
        .par_iter()
        .map(|c| solve_cell(args, c))
        .collect::<CliResult<_>>()?;

    let mut run = Run::start(&args.out)?;
    {
        let mut w = csv_writer(run.create("sweep.csv")?);
        w.write_record([
            "cell",
            "alpha",
            "beta",
            "reward_scale",
            "seed",
            "stage",
            "iteration",
            "residual",
        ])
        .map_err(Failure::internal)?;
        for (k, (cell, r)) in cells.iter().zip(&runs).enumerate() {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            for &(stage, it, res) in &r.rows {
                w.write_record([
                    k.to_string(),
                    opt(cell.alpha),
                    opt(cell.beta),
                    fmt_f64(cell.reward_scale),
                    cell.seed.to_string(),
                    stage.to_string(),
                    it.to_string(),
                    fmt_f64(res),
                ])
                .map_err(Failure::internal)?;
            }
        }
        w.flush()?;
    }
    let first = &runs[0];
    let summary: Vec<CellSummary> = cells
        .iter()
        .zip(&runs)
        .map(|(cell, r)| CellSummary {
            cell: cell.clone(),
            converged: r.converged,
            iterations: r.rows.len(),
            max_q_distance: r
                .q
                .iter()
                .zip(&first.q)
                .map(|(a, b)| a.sup_distance(b))
                .fold(0.0, f64::max),
            argmax_mismatches: r
                .policies
                .iter()
                .zip(&first.policies)
                .map(|(a, b)| {
                    a.iter_rows()
                        .zip(b.iter_rows())
                        .filter(|(x, y)| {
                            argmax_with_tolerance(x, ARGMAX_TIE_TOL) != argmax_with_tolerance(y, ARGMAX_TIE_TOL)
                        })
                        .count()
                })
                .sum(),
        })
        .collect();
    run.converged = summary.iter().all(|s| s.converged);
    if !run.converged {
        run.warn("some cells did not reach the stopping threshold".into());
    }
    run.write_json("bench_summary.json", &summary)?;
    let resolved = BenchArgs {
        game: args.game.resolved(),
        ..args.clone()
    };
    run.finish(Command::Bench(resolved), args.seeds[0])?;
    Ok(())
}

fn check_grid(args: &BenchArgs) -> CliResult<()> {
    args.game.check()?;
    for &b in &args.betas {
        GameArgs {
            beta: Some(b),
            ..args.game.clone()
        }
        .check()?;
    }
    for &a in &args.alphas {
        super::check_alpha(a)?;
    }
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}
