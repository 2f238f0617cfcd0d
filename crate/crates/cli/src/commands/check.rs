use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use mge_core::envs::BuiltGame;
use mge_core::finite::{check_alpha_convergence_condition, check_theorem2_bound};
use mge_core::infinite::check_theorem1_bound;
use mge_core::occupancy::check_theorem3_condition;
use mge_core::HorizonMode;

use super::check_alpha;
use crate::artifacts::Run;
use crate::failure::CliResult;
use crate::source::GameArgs;
use crate::Command;

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Also evaluate the convergence condition of the mixed finite-horizon
    /// update at this alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

/// One sufficient condition evaluated on a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl Condition {
    pub fn warning(&self) -> String {
        format!("{} not satisfied: lhs = {} > rhs = {}", self.name, self.lhs, self.rhs)
    }
}

/// The conditions that apply to the game's horizon mode.
pub fn conditions(built: &BuiltGame, alpha: Option<f64>) -> CliResult<Vec<Condition>> {
    let mut out = Vec::new();
    match built {
        BuiltGame::Markov(game) => match game.horizon_mode()? {
            HorizonMode::Discounted(_) => {
                let c = check_theorem1_bound(game)?;
                out.push(Condition {
                    name: "infinite-horizon reward bound".into(),
                    satisfied: c.satisfied,
                    lhs: c.lhs,
                    rhs: c.rhs,
                });
            }
            HorizonMode::Finite(_) => {
                let c = check_theorem2_bound(game)?;
                out.push(Condition {
                    name: "finite-horizon reward bound".into(),
                    satisfied: c.satisfied,
                    lhs: c.lhs,
                    rhs: c.rhs,
                });
                if let Some(a) = alpha {
                    let c = check_alpha_convergence_condition(game, a)?;
                    out.push(Condition {
                        name: format!("mixed-update condition at alpha {a}"),
                        satisfied: c.satisfied,
                        lhs: c.gamma_ab + (1.0 - c.alpha),
                        rhs: 1.0,
                    });
                }
            }
        },
        BuiltGame::Simplified(sgame) => {
            let c = check_theorem3_condition(sgame)?;
            out.push(Condition {
                name: "occupancy coupling condition".into(),
                satisfied: c.satisfied,
                lhs: c.lhs,
                rhs: c.rhs,
            });
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    game: &'a str,
    valid: bool,
    conditions: Vec<Condition>,
}

pub fn run(args: &CheckArgs) -> CliResult<()> {
    if let Some(a) = args.alpha {
        check_alpha(a)?;
    }
    let built = args.game.load()?;
    let mut run = Run::start(&args.out)?;
    let conds = conditions(&built, args.alpha)?;
    for c in conds.iter().filter(|c| !c.satisfied) {
        run.warn(c.warning());
    }
    let report = CheckReport {
        game: &args.game.game,
        valid: true,
        conditions: conds,
    };
    // A closed stdout (e.g. piped into `head`) must not abort the run.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report)?);
    run.write_json("report.json", &report)?;
    let resolved = CheckArgs {
        game: args.game.resolved(),
        ..args.clone()
    };
    run.finish(Command::Check(resolved), 0)?;
    Ok(())
}
