use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mge_core::envs::BuiltGame;
use mge_core::irl::{
    online_mmce_irl_step, write_theta_history, FeatureKind, FeatureModel, ForwardModel, IrlConfig, TrajectoryLog,
};
use mge_core::Table;

use crate::artifacts::Run;
use crate::failure::{input_error, CliResult, Failure};
use crate::source::GameArgs;
use crate::Command;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureArg {
    OwnState,
    OwnStateAction,
    JointState,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardArg {
    MgeF,
    Softmax,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// JSON-lines trajectory records (`episode`, `t`, `state`, `action`).
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long, value_enum, default_value_t = FeatureArg::OwnStateAction)]
    pub features: FeatureArg,
    /// The observer's own reward: `game` (its reward in the game), `zero`,
    /// or a JSON file holding a table (`rows`, `cols`, `data`).
    #[arg(long, default_value = "game")]
    pub own_reward: String,
    /// The agent whose reward is known; the others are learned.
    #[arg(long, default_value_t = 0)]
    pub observer: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.05)]
    pub rho: f64,
    #[arg(long, default_value_t = 10.0)]
    pub ball_radius: f64,
    /// Equilibrium model predicting the opponents.
    #[arg(long, value_enum, default_value_t = ForwardArg::MgeF)]
    pub forward: ForwardArg,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

fn own_reward(spec: &str, game: &mge_core::MarkovGame, observer: usize) -> CliResult<Table> {
    match spec {
        "game" => Ok(game.reward(observer).clone()),
        "zero" => Ok(Table::zeros(game.num_states(), game.num_actions())),
        path => {
            let file = File::open(path).map_err(|e| Failure::input(format!("{path}: {e}")))?;
            let t: Table =
                serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure::input(format!("{path}: {e}")))?;
            if t.rows() != game.num_states() || t.cols() != game.num_actions() {
                return Err(Failure::input(format!(
                    "{path}: own reward is {}x{}, game needs {}x{}",
                    t.rows(),
                    t.cols(),
                    game.num_states(),
                    game.num_actions()
                )));
            }
            Ok(t)
        }
    }
}

pub fn run(args: &IrlArgs) -> CliResult<()> {
    if !(args.rho > 0.0 && args.rho.is_finite()) {
        return Err(Failure::usage(format!("--rho {} must be positive", args.rho)));
    }
    if !(args.ball_radius > 0.0 && args.ball_radius.is_finite()) {
        return Err(Failure::usage(format!(
            "--ball-radius {} must be positive",
            args.ball_radius
        )));
    }
    let game = match args.game.load()? {
        BuiltGame::Markov(g) => g,
        BuiltGame::Simplified(_) => return Err(Failure::input("IRL needs a finite-horizon Markov game")),
    };
    game.require_finite().map_err(input_error)?;
    if args.observer >= game.num_agents() {
        return Err(Failure::usage(format!(
            "--observer {} of {} agents",
            args.observer,
            game.num_agents()
        )));
    }
    let file =
        File::open(&args.trajectories).map_err(|e| Failure::input(format!("{}: {e}", args.trajectories.display())))?;
    let label = args.trajectories.display().to_string();
    let log = TrajectoryLog::read_jsonl(BufReader::new(file), &label).map_err(input_error)?;
    if log.is_empty() {
        return Err(Failure::input(format!("{label}: no trajectory records")));
    }
    log.validate(&game).map_err(input_error)?;
    let own = own_reward(&args.own_reward, &game, args.observer)?;

    let kind = match args.features {
        FeatureArg::OwnState => FeatureKind::OwnState,
        FeatureArg::OwnStateAction => FeatureKind::OwnStateAction,
        FeatureArg::JointState => FeatureKind::JointState,
    };
    let mut model = FeatureModel::of_kind(&game, kind).map_err(input_error)?;
    model.step_size = args.rho;
    model.radius = args.ball_radius;
    let cfg = IrlConfig {
        observer: args.observer,
        forward: match args.forward {
            ForwardArg::MgeF => ForwardModel::MgeF,
            ForwardArg::Softmax => ForwardModel::Softmax,
        },
        ..IrlConfig::default()
    };

    let mut run = Run::start(&args.out)?;
    let mut history = vec![model.theta.clone()];
    let mut gaps = vec![vec![0.0; game.num_agents()]];
    for _ in 0..args.steps {
        let step = online_mmce_irl_step(&game, &log, &mut model, &own, &cfg)?;
        if !step.converged {
            run.converged = false;
        }
        history.push(model.theta.clone());
        gaps.push(step.gap_norms);
    }
    if !run.converged {
        run.warn("the equilibrium solve did not converge in at least one step".into());
    }
    write_theta_history(&history, &gaps, run.create("theta_history.csv")?)?;
    let resolved = IrlArgs {
        game: args.game.resolved(),
        trajectories: args.trajectories.canonicalize()?,
        own_reward: match args.own_reward.as_str() {
            "game" | "zero" => args.own_reward.clone(),
            p => std::path::Path::new(p).canonicalize()?.display().to_string(),
        },
        ..args.clone()
    };
    run.finish(Command::Irl(resolved), 0)?;
    Ok(())
}
