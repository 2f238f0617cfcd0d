//! Markov-game data model.
//!
//! Joint states and joint actions are linearized row-major with agent 0
//! outermost; every table in the crate is indexed by the flat id.

mod file;
mod kernel;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use file::{load_game, parse_game, save_game, to_toml_string, GameFile, TransitionSpec};
pub use kernel::{Kernel, Row, DENSE_ENTRY_LIMIT};

use crate::error::{Error, Result};
use crate::table::Table;
use crate::PROB_TOL;

/// Mixed-radix linearization of a product index space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointIndex {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

/// A joint state together with its flat id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub components: Vec<usize>,
    pub flat_index: usize,
}

impl JointIndex {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "index sizes must be nonempty and positive, got {sizes:?}"
            )));
        }
        let mut strides = vec![1; sizes.len()];
        let mut total: usize = 1;
        for i in (0..sizes.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(sizes[i])
                .ok_or_else(|| Error::SizeOverflow(format!("product of {sizes:?} overflows")))?;
        }
        Ok(JointIndex { sizes, strides, total })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn arity(&self) -> usize {
        self.sizes.len()
    }

    pub fn flatten(&self, components: &[usize]) -> Result<usize> {
        if components.len() != self.sizes.len() {
            return Err(Error::Dimension(format!(
                "expected {} components, got {}",
                self.sizes.len(),
                components.len()
            )));
        }
        let mut k = 0;
        for (i, (&c, &s)) in components.iter().zip(&self.sizes).enumerate() {
            if c >= s {
                return Err(Error::OutOfRange(format!("component {i} = {c} not below {s}")));
            }
            k += c * self.strides[i];
        }
        Ok(k)
    }

    #[inline]
    pub fn component(&self, flat: usize, i: usize) -> usize {
        (flat / self.strides[i]) % self.sizes[i]
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        (0..self.sizes.len()).map(|i| self.component(flat, i)).collect()
    }

    pub fn state(&self, flat: usize) -> Result<JointState> {
        if flat >= self.total {
            return Err(Error::OutOfRange(format!("flat index {flat} >= {}", self.total)));
        }
        Ok(JointState {
            components: self.unflatten(flat),
            flat_index: flat,
        })
    }

    pub fn joint(&self, components: &[usize]) -> Result<JointState> {
        Ok(JointState {
            flat_index: self.flatten(components)?,
            components: components.to_vec(),
        })
    }
}

/// Discounted infinite horizon or undiscounted finite horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HorizonMode {
    Discounted(f64),
    Finite(usize),
}

/// Raw ingredients of a [`MarkovGame`].
#[derive(Clone, Debug)]
pub struct GameParts {
    pub state_sizes: Vec<usize>,
    pub num_actions: usize,
    pub transition: Kernel,
    /// Per agent, a (joint state x own action) table.
    pub rewards: Vec<Table>,
    /// Per agent, one value per joint state.
    pub final_rewards: Option<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
    pub discount: Option<f64>,
    pub horizon: Option<usize>,
    pub beta: f64,
    pub agent_names: Vec<String>,
    pub action_names: Vec<String>,
}

/// An `M`-agent Markov game with a shared action set.
///
/// Immutable once built; share it by reference across workers.
#[derive(Clone, Debug)]
pub struct MarkovGame {
    states: JointIndex,
    joint_actions: JointIndex,
    num_actions: usize,
    transition: Kernel,
    rewards: Vec<Table>,
    final_rewards: Option<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
    discount: Option<f64>,
    horizon: Option<usize>,
    beta: f64,
    agent_names: Vec<String>,
    action_names: Vec<String>,
}

impl MarkovGame {
    /// Builds a game after structural (shape) checks only. Use
    /// [`validate_game`] to check the probabilistic invariants, or
    /// [`MarkovGame::from_parts`] to do both.
    pub fn from_parts_unchecked(parts: GameParts) -> Result<Self> {
        let m = parts.state_sizes.len();
        if m == 0 {
            return Err(Error::InvalidArgument("a game needs at least one agent".into()));
        }
        if parts.num_actions == 0 {
            return Err(Error::InvalidArgument("action set is empty".into()));
        }
        let states = JointIndex::new(parts.state_sizes.clone())?;
        let joint_actions = JointIndex::new(vec![parts.num_actions; m])?;
        let n = states.len();
        if parts.transition.states() != n || parts.transition.joint_actions() != joint_actions.len() {
            return Err(Error::Dimension(format!(
                "kernel is {}x{}, game needs {n} states x {} joint actions",
                parts.transition.states(),
                parts.transition.joint_actions(),
                joint_actions.len()
            )));
        }
        if parts.rewards.len() != m {
            return Err(Error::Dimension(format!(
                "{} reward tables for {m} agents",
                parts.rewards.len()
            )));
        }
        for (i, r) in parts.rewards.iter().enumerate() {
            if r.rows() != n || r.cols() != parts.num_actions {
                return Err(Error::Dimension(format!(
                    "reward table of agent {i} is {}x{}, expected {n}x{}",
                    r.rows(),
                    r.cols(),
                    parts.num_actions
                )));
            }
        }
        if let Some(f) = &parts.final_rewards {
            if f.len() != m || f.iter().any(|v| v.len() != n) {
                return Err(Error::Dimension(format!(
                    "final rewards must be {m} vectors of length {n}"
                )));
            }
        }
        if parts.initial_dist.len() != n {
            return Err(Error::Dimension(format!(
                "p0 has {} entries, expected {n}",
                parts.initial_dist.len()
            )));
        }
        let agent_names = if parts.agent_names.is_empty() {
            (0..m).map(|i| format!("agent{i}")).collect()
        } else if parts.agent_names.len() == m {
            parts.agent_names
        } else {
            return Err(Error::Dimension("agent_names length != agents".into()));
        };
        let action_names = if parts.action_names.is_empty() {
            (0..parts.num_actions).map(|a| a.to_string()).collect()
        } else if parts.action_names.len() == parts.num_actions {
            parts.action_names
        } else {
            return Err(Error::Dimension("action_names length != actions".into()));
        };
        Ok(MarkovGame {
            states,
            joint_actions,
            num_actions: parts.num_actions,
            transition: parts.transition,
            rewards: parts.rewards,
            final_rewards: parts.final_rewards,
            initial_dist: parts.initial_dist,
            discount: parts.discount,
            horizon: parts.horizon,
            beta: parts.beta,
            agent_names,
            action_names,
        })
    }

    /// Builds and validates.
    pub fn from_parts(parts: GameParts) -> Result<Self> {
        let game = Self::from_parts_unchecked(parts)?;
        let report = validate_game(&game);
        if report.is_pass() {
            Ok(game)
        } else {
            Err(Error::Validation(report))
        }
    }

    pub fn into_parts(self) -> GameParts {
        GameParts {
            state_sizes: self.states.sizes().to_vec(),
            num_actions: self.num_actions,
            transition: self.transition,
            rewards: self.rewards,
            final_rewards: self.final_rewards,
            initial_dist: self.initial_dist,
            discount: self.discount,
            horizon: self.horizon,
            beta: self.beta,
            agent_names: self.agent_names,
            action_names: self.action_names,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.states.arity()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.joint_actions.len()
    }

    pub fn state_sizes(&self) -> &[usize] {
        self.states.sizes()
    }

    pub fn states(&self) -> &JointIndex {
        &self.states
    }

    pub fn joint_actions(&self) -> &JointIndex {
        &self.joint_actions
    }

    pub fn transition(&self) -> &Kernel {
        &self.transition
    }

    pub fn rewards(&self) -> &[Table] {
        &self.rewards
    }

    pub fn reward(&self, agent: usize) -> &Table {
        &self.rewards[agent]
    }

    pub fn final_rewards(&self) -> Option<&[Vec<f64>]> {
        self.final_rewards.as_deref()
    }

    /// Final reward of `agent`, zeros when the game declares none.
    pub fn final_reward(&self, agent: usize) -> Vec<f64> {
        match &self.final_rewards {
            Some(f) => f[agent].clone(),
            None => vec![0.0; self.num_states()],
        }
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn discount(&self) -> Option<f64> {
        self.discount
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agent_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn horizon_mode(&self) -> Result<HorizonMode> {
        match (self.discount, self.horizon) {
            (Some(g), None) => Ok(HorizonMode::Discounted(g)),
            (None, Some(t)) => Ok(HorizonMode::Finite(t)),
            _ => Err(Error::InvalidArgument(
                "exactly one horizon mode (gamma or horizon) must be set".into(),
            )),
        }
    }

    pub fn require_discounted(&self) -> Result<f64> {
        match self.horizon_mode()? {
            HorizonMode::Discounted(g) => Ok(g),
            HorizonMode::Finite(_) => Err(Error::HorizonMode {
                expected: "discounted infinite-horizon",
            }),
        }
    }

    pub fn require_finite(&self) -> Result<usize> {
        match self.horizon_mode()? {
            HorizonMode::Finite(t) => Ok(t),
            HorizonMode::Discounted(_) => Err(Error::HorizonMode {
                expected: "finite-horizon",
            }),
        }
    }

    /// `max_i ‖R_i‖_∞`.
    pub fn max_reward_norm(&self) -> f64 {
        self.rewards.iter().map(Table::sup_norm).fold(0.0, f64::max)
    }

    /// `max_i ‖R_{i,F}‖_∞`, zero when there are no final rewards.
    pub fn max_final_reward_norm(&self) -> f64 {
        self.final_rewards
            .iter()
            .flatten()
            .map(|v| crate::table::sup_norm(v))
            .fold(0.0, f64::max)
    }

    /// Distribution over joint next states for a joint action.
    pub fn joint_transition_row(&self, x: &JointState, joint_action: &[usize]) -> Result<Vec<f64>> {
        let flat = self.states.flatten(&x.components)?;
        if flat != x.flat_index {
            return Err(Error::InvalidArgument(format!(
                "joint state components {:?} do not match flat index {}",
                x.components, x.flat_index
            )));
        }
        let ja = self.joint_actions.flatten(joint_action)?;
        Ok(self.transition.row(flat, ja).to_dense(self.num_states()))
    }

    /// Copy with every reward (and final reward) multiplied by `factor`.
    pub fn with_scaled_rewards(&self, factor: f64) -> MarkovGame {
        let mut g = self.clone();
        g.rewards = g.rewards.iter().map(|r| r.scaled(factor)).collect();
        if let Some(f) = &mut g.final_rewards {
            for v in f.iter_mut() {
                v.iter_mut().for_each(|x| *x *= factor);
            }
        }
        g
    }

    pub fn with_beta(&self, beta: f64) -> MarkovGame {
        let mut g = self.clone();
        g.beta = beta;
        g
    }

    /// Replaces the horizon mode, dropping final rewards when switching to a
    /// discounted game.
    pub fn with_horizon_mode(&self, mode: HorizonMode) -> MarkovGame {
        let mut g = self.clone();
        match mode {
            HorizonMode::Discounted(gamma) => {
                g.discount = Some(gamma);
                g.horizon = None;
                g.final_rewards = None;
            }
            HorizonMode::Finite(t) => {
                g.discount = None;
                g.horizon = Some(t);
            }
        }
        g
    }

    pub fn with_rewards(&self, rewards: Vec<Table>, final_rewards: Option<Vec<Vec<f64>>>) -> Result<MarkovGame> {
        let mut parts = self.clone().into_parts();
        parts.rewards = rewards;
        parts.final_rewards = final_rewards;
        MarkovGame::from_parts_unchecked(parts)
    }

    pub fn with_initial_dist(&self, p0: Vec<f64>) -> Result<MarkovGame> {
        let mut parts = self.clone().into_parts();
        parts.initial_dist = p0;
        MarkovGame::from_parts_unchecked(parts)
    }
}

/// A single broken invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TransitionRowSum {
        state: Vec<usize>,
        joint_action: Vec<usize>,
        sum: f64,
    },
    NegativeProbability {
        state: Vec<usize>,
        joint_action: Vec<usize>,
        next: usize,
        p: f64,
    },
    HorizonMode {
        discount: Option<f64>,
        horizon: Option<usize>,
    },
    DiscountRange(f64),
    ZeroHorizon,
    FinalRewardsWithDiscount,
    NonFiniteReward {
        agent: usize,
        state: usize,
        action: usize,
    },
    NonFiniteFinalReward {
        agent: usize,
        state: usize,
    },
    InitialDistSum(f64),
    NegativeInitial {
        state: usize,
        p: f64,
    },
    Beta(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TransitionRowSum {
                state,
                joint_action,
                sum,
            } => write!(
                f,
                "transition row at state {state:?}, joint action {joint_action:?} sums to {sum}"
            ),
            Violation::NegativeProbability {
                state,
                joint_action,
                next,
                p,
            } => write!(
                f,
                "negative probability {p} at state {state:?}, joint action {joint_action:?} -> {next}"
            ),
            Violation::HorizonMode { discount, horizon } => write!(
                f,
                "exactly one horizon mode required (gamma = {discount:?}, horizon = {horizon:?})"
            ),
            Violation::DiscountRange(g) => write!(f, "gamma = {g} outside [0, 1)"),
            Violation::ZeroHorizon => write!(f, "horizon must be positive"),
            Violation::FinalRewardsWithDiscount => {
                write!(f, "final rewards are only meaningful with a finite horizon")
            }
            Violation::NonFiniteReward { agent, state, action } => write!(
                f,
                "reward of agent {agent} at state {state}, action {action} is not finite"
            ),
            Violation::NonFiniteFinalReward { agent, state } => {
                write!(f, "final reward of agent {agent} at state {state} is not finite")
            }
            Violation::InitialDistSum(s) => write!(f, "p0 sums to {s}"),
            Violation::NegativeInitial { state, p } => {
                write!(f, "p0 has negative mass {p} at state {state}")
            }
            Violation::Beta(b) => write!(f, "beta = {b} must be positive and finite"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every probabilistic and numerical invariant of `game`.
pub fn validate_game(game: &MarkovGame) -> ValidationReport {
    let mut violations = Vec::new();
    let n = game.num_states();

    for x in 0..n {
        for ja in 0..game.num_joint_actions() {
            let row = game.transition.row(x, ja);
            let mut sum = 0.0;
            for (next, p) in row.iter() {
                if p < 0.0 || !p.is_finite() {
                    violations.push(Violation::NegativeProbability {
                        state: game.states.unflatten(x),
                        joint_action: game.joint_actions.unflatten(ja),
                        next,
                        p,
                    });
                }
                sum += p;
            }
            if !((sum - 1.0).abs() <= PROB_TOL) {
                violations.push(Violation::TransitionRowSum {
                    state: game.states.unflatten(x),
                    joint_action: game.joint_actions.unflatten(ja),
                    sum,
                });
            }
        }
    }

    match (game.discount, game.horizon) {
        (Some(g), None) => {
            if !(0.0..1.0).contains(&g) {
                violations.push(Violation::DiscountRange(g));
            }
            if game.final_rewards.is_some() {
                violations.push(Violation::FinalRewardsWithDiscount);
            }
        }
        (None, Some(t)) => {
            if t == 0 {
                violations.push(Violation::ZeroHorizon);
            }
        }
        (discount, horizon) => violations.push(Violation::HorizonMode { discount, horizon }),
    }

    for (agent, r) in game.rewards.iter().enumerate() {
        for state in 0..r.rows() {
            for (action, v) in r.row(state).iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::NonFiniteReward { agent, state, action });
                }
            }
        }
    }
    if let Some(f) = &game.final_rewards {
        for (agent, v) in f.iter().enumerate() {
            for (state, r) in v.iter().enumerate() {
                if !r.is_finite() {
                    violations.push(Violation::NonFiniteFinalReward { agent, state });
                }
            }
        }
    }

    let mut p0_sum = 0.0;
    for (state, &p) in game.initial_dist.iter().enumerate() {
        if p < 0.0 || !p.is_finite() {
            violations.push(Violation::NegativeInitial { state, p });
        }
        p0_sum += p;
    }
    if !((p0_sum - 1.0).abs() <= PROB_TOL) {
        violations.push(Violation::InitialDistSum(p0_sum));
    }

    if !(game.beta > 0.0 && game.beta.is_finite()) {
        violations.push(Violation::Beta(game.beta));
    }

    ValidationReport { violations }
}
