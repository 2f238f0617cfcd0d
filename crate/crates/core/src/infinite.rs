//! Infinite-horizon coupled operator `T_i` and its value-iteration solver.
//!
//! `T_i(Q)(x,a_i) = R_i(x,a_i) + γ Σ_{a_{-i}} Π_{j≠i} π_j(a_j|x) Σ_{x'} P(x'|x,a⃗) V_i(x')`
//! with `π_j = Exp_β(Q_j)` and `V_i` the soft value of `Q_i` under its own
//! Boltzmann policy.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backup::expected_backup;
use crate::boltzmann::{self, PolicyTable, QFunction};
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::table::Table;
use crate::trace::SolveTrace;

/// Starting point of a fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Zeros,
    /// Entries uniform in `[-scale, scale]`, drawn from the config seed.
    Random {
        scale: f64,
    },
}

impl Init {
    /// One `states x actions` table per agent.
    pub fn tables(&self, seed: u64, agents: usize, states: usize, actions: usize) -> Vec<Table> {
        match *self {
            Init::Zeros => vec![Table::zeros(states, actions); agents],
            Init::Random { scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..agents)
                    .map(|_| {
                        let data = (0..states * actions)
                            .map(|_| {
                                if scale > 0.0 {
                                    rng.gen_range(-scale..=scale)
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        Table::from_vec(states, actions, data).expect("shape is consistent")
                    })
                    .collect()
            }
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match *self {
            Init::Random { scale } if !(scale >= 0.0 && scale.is_finite()) => Err(Error::InvalidArgument(format!(
                "init scale {scale} must be finite and >= 0"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Opponents of the distinguished agent update from the previous
    /// iterate, then the distinguished agent updates against them.
    PaperAsymmetric,
    /// Every agent updates from the previous iterate.
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgeiConfig {
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub sweep_mode: SweepMode,
    pub distinguished_agent: usize,
    pub seed: u64,
    pub init: Init,
}

impl Default for MgeiConfig {
    fn default() -> Self {
        MgeiConfig {
            epsilon: 1e-8,
            max_sweeps: 100_000,
            sweep_mode: SweepMode::PaperAsymmetric,
            distinguished_agent: 0,
            seed: 0,
            init: Init::Zeros,
        }
    }
}

impl MgeiConfig {
    fn check(&self, agents: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} must be > 0",
                self.epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        if self.distinguished_agent >= agents {
            return Err(Error::OutOfRange(format!(
                "distinguished agent {} of {agents}",
                self.distinguished_agent
            )));
        }
        self.init.check()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgeiSolution {
    pub q: Vec<QFunction>,
    pub policies: Vec<PolicyTable>,
    pub trace: SolveTrace,
}

/// Outcome of a sufficient-condition check, `satisfied = lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub(crate) fn check_q_shapes(game: &MarkovGame, q_all: &[QFunction]) -> Result<()> {
    if q_all.len() != game.num_agents() {
        return Err(Error::Dimension(format!(
            "{} Q-functions for {} agents",
            q_all.len(),
            game.num_agents()
        )));
    }
    for q in q_all {
        if q.values.rows() != game.num_states() || q.values.cols() != game.num_actions() {
            return Err(Error::Dimension(format!(
                "Q of agent {} is {}x{}, game needs {}x{}",
                q.agent,
                q.values.rows(),
                q.values.cols(),
                game.num_states(),
                game.num_actions()
            )));
        }
    }
    Ok(())
}

/// `T_i(Q_{-i}, Q_i)`.
pub fn apply_t(game: &MarkovGame, agent: usize, q_all: &[QFunction]) -> Result<QFunction> {
    let gamma = game.require_discounted()?;
    check_q_shapes(game, q_all)?;
    if agent >= game.num_agents() {
        return Err(Error::OutOfRange(format!("agent {agent}")));
    }
    let tables: Vec<&Table> = q_all.iter().map(|q| &q.values).collect();
    Ok(QFunction::new(agent, t_table(game, agent, &tables, gamma)))
}

fn t_table(game: &MarkovGame, agent: usize, q: &[&Table], gamma: f64) -> Table {
    let beta = game.beta();
    let policies: Vec<Table> = q
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if j == agent {
                Table::zeros(0, 0)
            } else {
                boltzmann::boltzmann_table(t, beta)
            }
        })
        .collect();
    let refs: Vec<&Table> = policies.iter().collect();
    let v = boltzmann::self_soft_values(q[agent], beta);
    expected_backup(game, agent, game.reward(agent), &refs, &v, gamma)
}

/// `max_i ‖R_i‖_∞ ≤ (1−γ)² / (2γMβ)`; the right side is `+∞` at `γ = 0`.
pub fn check_theorem1_bound(game: &MarkovGame) -> Result<BoundCheck> {
    let gamma = game.require_discounted()?;
    let lhs = game.max_reward_norm();
    let rhs = theorem1_rhs(gamma, game.num_agents(), game.beta());
    Ok(BoundCheck {
        satisfied: lhs <= rhs,
        lhs,
        rhs,
    })
}

pub fn theorem1_rhs(gamma: f64, agents: usize, beta: f64) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - gamma).powi(2) / (2.0 * gamma * agents as f64 * beta)
    }
}

/// Scales all rewards so that `max_i ‖R_i‖_∞ ≤ safety · rhs`; games already
/// inside that margin are returned unchanged.
pub fn scale_rewards_to_bound(game: &MarkovGame, safety: f64) -> Result<MarkovGame> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!("safety = {safety} must be in (0, 1]")));
    }
    let check = check_theorem1_bound(game)?;
    let target = safety * check.rhs;
    if check.lhs <= target {
        return Ok(game.clone());
    }
    let mut factor = target / check.lhs;
    loop {
        let scaled = game.with_scaled_rewards(factor);
        if scaled.max_reward_norm() <= target {
            return Ok(scaled);
        }
        factor *= 1.0 - f64::EPSILON;
    }
}

/// Runs sweeps of `T` until the sup-norm change drops below `epsilon`.
pub fn solve_mge_i(game: &MarkovGame, config: &MgeiConfig) -> Result<MgeiSolution> {
    let gamma = game.require_discounted()?;
    let m = game.num_agents();
    config.check(m)?;
    let q0 = config
        .init
        .tables(config.seed, m, game.num_states(), game.num_actions());
    solve_from(game, gamma, q0, config)
}

/// Like [`solve_mge_i`] but starting from the given tables.
pub fn solve_mge_i_from(game: &MarkovGame, start: Vec<QFunction>, config: &MgeiConfig) -> Result<MgeiSolution> {
    let gamma = game.require_discounted()?;
    config.check(game.num_agents())?;
    check_q_shapes(game, &start)?;
    solve_from(game, gamma, start.into_iter().map(|q| q.values).collect(), config)
}

fn solve_from(game: &MarkovGame, gamma: f64, mut q: Vec<Table>, config: &MgeiConfig) -> Result<MgeiSolution> {
    let m = game.num_agents();
    let started = Instant::now();
    let mut trace = SolveTrace::default();
    let mut converged = false;
    while trace.sweeps < config.max_sweeps {
        let sweep_start = Instant::now();
        let next = sweep(game, gamma, &q, config);
        let residual = (0..m).map(|j| next[j].sup_distance(&q[j])).fold(0.0, f64::max);
        q = next;
        trace.record(residual, sweep_start);
        if !residual.is_finite() {
            break;
        }
        if residual < config.epsilon {
            converged = true;
            break;
        }
    }
    trace.finish(converged, started);
    let beta = game.beta();
    let q: Vec<QFunction> = q.into_iter().enumerate().map(|(i, t)| QFunction::new(i, t)).collect();
    let policies = q
        .iter()
        .map(|qi| PolicyTable {
            agent: qi.agent,
            time_step: None,
            probs: boltzmann::boltzmann_table(&qi.values, beta),
        })
        .collect();
    Ok(MgeiSolution { q, policies, trace })
}

fn sweep(game: &MarkovGame, gamma: f64, q: &[Table], config: &MgeiConfig) -> Vec<Table> {
    let m = game.num_agents();
    let stale: Vec<&Table> = q.iter().collect();
    match config.sweep_mode {
        SweepMode::Jacobi => (0..m).map(|j| t_table(game, j, &stale, gamma)).collect(),
        SweepMode::PaperAsymmetric => {
            let i = config.distinguished_agent;
            let mut next: Vec<Table> = (0..m)
                .map(|j| {
                    if j == i {
                        q[i].clone()
                    } else {
                        t_table(game, j, &stale, gamma)
                    }
                })
                .collect();
            let fresh: Vec<&Table> = next.iter().collect();
            let qi = t_table(game, i, &fresh, gamma);
            next[i] = qi;
            next
        }
    }
}

/// `max_i ‖T_i(Q_{-i}, Q_i) − Q_i‖_∞`.
pub fn fixed_point_residual(game: &MarkovGame, q_all: &[QFunction]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in q_all {
        worst = worst.max(apply_t(game, q.agent, q_all)?.values.sup_distance(&q.values));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::toy_parts;
    use crate::game::HorizonMode;

    fn toy(gamma: f64) -> MarkovGame {
        MarkovGame::from_parts(toy_parts())
            .unwrap()
            .with_horizon_mode(HorizonMode::Discounted(gamma))
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let g = toy(0.0);
        let q = Init::Random { scale: 3.0 }.tables(7, 2, g.num_states(), g.num_actions());
        let q: Vec<QFunction> = q.into_iter().enumerate().map(|(i, t)| QFunction::new(i, t)).collect();
        for i in 0..2 {
            assert_eq!(&apply_t(&g, i, &q).unwrap().values, g.reward(i));
        }
        let sol = solve_mge_i(&g, &MgeiConfig::default()).unwrap();
        assert!(sol.trace.converged && sol.trace.sweeps <= 2);
        assert_eq!(&sol.q[1].values, g.reward(1));
    }

    #[test]
    fn finite_game_rejected() {
        let g = toy(0.5).with_horizon_mode(HorizonMode::Finite(2));
        assert!(matches!(
            solve_mge_i(&g, &MgeiConfig::default()),
            Err(Error::HorizonMode { .. })
        ));
    }

    #[test]
    fn theorem1_bound_arithmetic() {
        let rhs = theorem1_rhs(0.9, 2, 1.0);
        assert!((rhs - 0.01 / 3.6).abs() < 1e-15);
        assert!((0.002..0.005).contains(&rhs));
        assert_eq!(theorem1_rhs(0.0, 3, 1.0), f64::INFINITY);
    }

    #[test]
    fn scaling_hits_margin() {
        let g = toy(0.9).with_beta(1.0);
        let bound = check_theorem1_bound(&g).unwrap();
        assert!(!bound.satisfied);
        let s = scale_rewards_to_bound(&g, 0.5).unwrap();
        let c = check_theorem1_bound(&s).unwrap();
        assert!(c.satisfied);
        assert!((c.lhs - 0.5 * c.rhs).abs() < 1e-15);
        let again = scale_rewards_to_bound(&s, 1.0).unwrap();
        assert_eq!(again.rewards(), s.rewards());
        assert!(scale_rewards_to_bound(&g, 0.0).is_err());
    }

    #[test]
    fn sweep_modes_agree_and_residual_small() {
        let g = scale_rewards_to_bound(&toy(0.8), 1.0).unwrap();
        let a = solve_mge_i(&g, &MgeiConfig::default()).unwrap();
        let b = solve_mge_i(
            &g,
            &MgeiConfig {
                sweep_mode: SweepMode::Jacobi,
                init: Init::Random { scale: 1.0 },
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a.trace.converged && b.trace.converged);
        for i in 0..2 {
            assert!(a.q[i].values.sup_distance(&b.q[i].values) < 1e-7);
        }
        assert!(fixed_point_residual(&g, &a.q).unwrap() < 2e-8);
        let bound = g.max_reward_norm() / (1.0 - 0.8);
        assert!(a.q.iter().all(|q| q.values.sup_norm() <= bound + 1e-12));
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = toy(0.99);
        let sol = solve_mge_i(
            &g,
            &MgeiConfig {
                max_sweeps: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!sol.trace.converged);
        assert_eq!(sol.trace.residuals.len(), 3);
    }
}
