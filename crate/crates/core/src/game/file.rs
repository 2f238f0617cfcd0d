//! TOML game files.
//!
//! ```toml
//! agents = 2
//! states = [2, 2]          # |X_i| per agent
//! actions = 2              # shared action set size
//! beta = 1.0
//! gamma = 0.9              # or: horizon = 3
//! p0 = [0.25, 0.25, 0.25, 0.25]                  # optional, default uniform
//! rewards = [[[0.0, 1.0], ...], [[...], ...]]    # agent -> joint state -> own action
//! final_rewards = [[...], [...]]                 # agent -> joint state (finite horizon)
//! transition = "uniform"   # rule name: "uniform" | "identity"
//! # transition = [[...], ...]           dense rows, row index = state * actions^M + joint action
//! # transition = { sparse = [[from, joint_action, to, p], ...] }
//! ```
//!
//! A file may instead name a builtin environment (`builtin = "pursuit-3p"`)
//! and override `beta`, `horizon`, `gamma` and `initial`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GameParts, Kernel, MarkovGame};
use crate::envs::{self, EnvParams};
use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_rewards: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionSpec {
    Rule(String),
    Dense(Vec<Vec<f64>>),
    Sparse { sparse: Vec<(usize, usize, usize, f64)> },
}

/// Loads a game file, or a builtin environment when `source` names one and
/// no such file exists.
pub fn load_game(source: impl AsRef<Path>) -> Result<MarkovGame> {
    let path = source.as_ref();
    let label = path.display().to_string();
    if !path.exists() {
        if let Some(name) = path.to_str().filter(|n| envs::is_builtin(n)) {
            return envs::build_markov(name, &EnvParams::default());
        }
    }
    let text = std::fs::read_to_string(path)?;
    parse_game(&text, &label)
}

/// Parses TOML text; `label` is used in error messages.
pub fn parse_game(text: &str, label: &str) -> Result<MarkovGame> {
    let file: GameFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: label.to_string(),
        message: e.to_string(),
    })?;
    file.into_game(label)
}

pub fn save_game(game: &MarkovGame, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_toml_string(game)?)?;
    Ok(())
}

pub fn to_toml_string(game: &MarkovGame) -> Result<String> {
    toml::to_string(&GameFile::from_game(game)).map_err(|e| Error::Parse {
        path: "<serialize>".into(),
        message: e.to_string(),
    })
}

fn missing(label: &str, key: &str) -> Error {
    Error::Parse {
        path: label.to_string(),
        message: format!("missing key `{key}`"),
    }
}

fn field_err(label: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: label.to_string(),
        message: format!("field `{key}`: {msg}"),
    }
}

impl GameFile {
    pub fn into_game(self, label: &str) -> Result<MarkovGame> {
        if let Some(name) = &self.builtin {
            let params = EnvParams {
                beta: self.beta,
                horizon: self.horizon,
                gamma: self.gamma,
                initial: self.initial.clone(),
                ..EnvParams::default()
            };
            return envs::build_markov(name, &params);
        }

        let agents = self.agents.ok_or_else(|| missing(label, "agents"))?;
        let state_sizes = self.states.ok_or_else(|| missing(label, "states"))?;
        if state_sizes.len() != agents {
            return Err(field_err(
                label,
                "states",
                format!("{} sizes for {agents} agents", state_sizes.len()),
            ));
        }
        let num_actions = self.actions.ok_or_else(|| missing(label, "actions"))?;
        let beta = self.beta.ok_or_else(|| missing(label, "beta"))?;
        let states = super::JointIndex::new(state_sizes.clone()).map_err(|e| field_err(label, "states", e))?;
        let jas = super::JointIndex::new(vec![num_actions; agents]).map_err(|e| field_err(label, "actions", e))?;
        let n = states.len();
        let nja = jas.len();

        let transition = match self.transition.ok_or_else(|| missing(label, "transition"))? {
            TransitionSpec::Rule(rule) => match rule.as_str() {
                "uniform" => {
                    let p = 1.0 / n as f64;
                    let rows = (0..n * nja).map(|_| (0..n).map(|j| (j, p)).collect()).collect();
                    Kernel::from_sparse_rows(n, nja, rows)?
                }
                "identity" => {
                    let rows = (0..n * nja).map(|r| vec![(r / nja, 1.0)]).collect();
                    Kernel::from_sparse_rows(n, nja, rows)?
                }
                other => return Err(field_err(label, "transition", format!("unknown rule `{other}`"))),
            },
            TransitionSpec::Dense(rows) => {
                if rows.len() != n * nja || rows.iter().any(|r| r.len() != n) {
                    return Err(field_err(
                        label,
                        "transition",
                        format!("dense table must be {} rows of {n}", n * nja),
                    ));
                }
                let rows = rows.into_iter().map(|r| r.into_iter().enumerate().collect()).collect();
                Kernel::dense_from_rows(n, nja, rows)?
            }
            TransitionSpec::Sparse { sparse } => {
                let mut rows = vec![Vec::new(); n * nja];
                for (k, (from, ja, to, p)) in sparse.into_iter().enumerate() {
                    if from >= n || ja >= nja || to >= n {
                        return Err(field_err(label, "transition.sparse", format!("entry {k} out of range")));
                    }
                    rows[from * nja + ja].push((to, p));
                }
                Kernel::sparse_from_rows(n, nja, rows)?
            }
        };

        let rewards = self.rewards.ok_or_else(|| missing(label, "rewards"))?;
        if rewards.len() != agents {
            return Err(field_err(label, "rewards", format!("expected {agents} agents")));
        }
        let rewards = rewards
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t = Table::from_rows(r).map_err(|e| field_err(label, "rewards", e))?;
                if t.rows() != n || t.cols() != num_actions {
                    return Err(field_err(
                        label,
                        "rewards",
                        format!("agent {i} table must be {n}x{num_actions}"),
                    ));
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;

        let initial_dist = self.p0.unwrap_or_else(|| vec![1.0 / n as f64; n]);

        MarkovGame::from_parts(GameParts {
            state_sizes,
            num_actions,
            transition,
            rewards,
            final_rewards: self.final_rewards,
            initial_dist,
            discount: self.gamma,
            horizon: self.horizon,
            beta,
            agent_names: self.agent_names.unwrap_or_default(),
            action_names: self.action_names.unwrap_or_default(),
        })
    }

    pub fn from_game(game: &MarkovGame) -> Self {
        let kernel = game.transition();
        let transition = if kernel.is_dense() {
            let n = game.num_states();
            let mut rows = Vec::with_capacity(n * game.num_joint_actions());
            for x in 0..n {
                for ja in 0..game.num_joint_actions() {
                    rows.push(kernel.row(x, ja).to_dense(n));
                }
            }
            TransitionSpec::Dense(rows)
        } else {
            let nja = game.num_joint_actions();
            let sparse = kernel
                .to_sparse_rows()
                .into_iter()
                .enumerate()
                .flat_map(|(r, row)| row.into_iter().map(move |(to, p)| (r / nja, r % nja, to, p)))
                .collect();
            TransitionSpec::Sparse { sparse }
        };
        GameFile {
            builtin: None,
            initial: None,
            agents: Some(game.num_agents()),
            states: Some(game.state_sizes().to_vec()),
            actions: Some(game.num_actions()),
            beta: Some(game.beta()),
            gamma: game.discount(),
            horizon: game.horizon(),
            agent_names: Some(game.agent_names().to_vec()),
            action_names: Some(game.action_names().to_vec()),
            p0: Some(game.initial_dist().to_vec()),
            rewards: Some(game.rewards().iter().map(Table::to_rows).collect()),
            final_rewards: game.final_rewards().map(<[Vec<f64>]>::to_vec),
            transition: Some(transition),
        }
    }
}
