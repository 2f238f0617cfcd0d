//! Game selection shared by the commands: a builtin name or a TOML game
//! file, plus overrides.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use mge_core::envs::{self, BuiltGame, EnvParams};
use mge_core::game::{load_game, validate_game};
use mge_core::HorizonMode;

use crate::failure::{input_error, CliResult, Failure};

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameArgs {
    /// Builtin environment name or path to a TOML game file.
    #[arg(long)]
    pub game: String,
    /// Inverse temperature of every agent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Finite horizon `T`.
    #[arg(long, conflicts_with = "gamma")]
    pub horizon: Option<usize>,
    /// Discount factor; switches the game to infinite horizon.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Starting placement, one component per agent.
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<usize>>,
    /// Penalty weights of an occupancy-coupled scene, one per agent or a
    /// single value for all.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
}

impl GameArgs {
    fn params(&self) -> EnvParams {
        EnvParams {
            beta: self.beta,
            horizon: self.horizon,
            gamma: self.gamma,
            initial: self.initial.clone(),
            mu: self.mu.clone(),
        }
    }

    pub fn check(&self) -> CliResult<()> {
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Failure::usage(format!("--beta {b} must be positive and finite")));
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Failure::usage(format!("--gamma {g} must be in [0, 1)")));
            }
        }
        if self.horizon == Some(0) {
            return Err(Failure::usage("--horizon must be >= 1"));
        }
        Ok(())
    }

    /// File paths made absolute so that a manifest can be replayed from
    /// another directory.
    pub fn resolved(&self) -> GameArgs {
        let mut out = self.clone();
        if !envs::is_builtin(&self.game) {
            if let Ok(p) = Path::new(&self.game).canonicalize() {
                out.game = p.display().to_string();
            }
        }
        out
    }

    pub fn load(&self) -> CliResult<BuiltGame> {
        self.check()?;
        let built = if envs::is_builtin(&self.game) {
            envs::build(&self.game, &self.params()).map_err(input_error)?
        } else {
            if !Path::new(&self.game).exists() {
                return Err(Failure::input(format!(
                    "`{}` is neither a builtin environment ({}) nor an existing file",
                    self.game,
                    envs::BUILTIN_NAMES.join(", ")
                )));
            }
            if self.mu.is_some() {
                return Err(Failure::usage("--mu applies to occupancy-coupled scenes only"));
            }
            let mut game = load_game(&self.game).map_err(input_error)?;
            if let Some(b) = self.beta {
                game = game.with_beta(b);
            }
            if let Some(t) = self.horizon {
                game = game.with_horizon_mode(HorizonMode::Finite(t));
            }
            if let Some(g) = self.gamma {
                game = game.with_horizon_mode(HorizonMode::Discounted(g));
            }
            if let Some(init) = &self.initial {
                let x = game.states().flatten(init).map_err(input_error)?;
                let mut p0 = vec![0.0; game.num_states()];
                p0[x] = 1.0;
                game = game.with_initial_dist(p0).map_err(input_error)?;
            }
            BuiltGame::Markov(game)
        };
        if let BuiltGame::Markov(g) = &built {
            let report = validate_game(g);
            if !report.is_pass() {
                return Err(input_error(mge_core::Error::Validation(report)));
            }
        }
        Ok(built)
    }

    /// Name used to look up event detectors, `None` for files.
    pub fn builtin_name(&self) -> Option<&str> {
        envs::is_builtin(&self.game).then_some(self.game.as_str())
    }
}
