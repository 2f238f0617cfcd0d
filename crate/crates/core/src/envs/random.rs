//! Seeded random games for benchmarks and uniqueness checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParts, HorizonMode, JointIndex, Kernel, MarkovGame, DENSE_ENTRY_LIMIT};
use crate::occupancy::{InteractionFunctional, SimplifiedGame};
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomGameSpec {
    pub agents: usize,
    pub states_per_agent: usize,
    pub actions: usize,
    pub mode: HorizonMode,
    /// Rewards (and final rewards) are uniform in `[-scale, scale]`.
    pub reward_scale: f64,
    pub seed: u64,
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn uniform(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale > 0.0 {
        rng.gen_range(-scale..=scale)
    } else {
        0.0
    }
}

/// Dense random game with full-support kernel rows, `β = 1`.
pub fn generate_random_game(spec: &RandomGameSpec) -> Result<MarkovGame> {
    if spec.agents == 0 || spec.states_per_agent == 0 || spec.actions == 0 {
        return Err(Error::InvalidArgument("random game sizes must be positive".into()));
    }
    let states = JointIndex::new(vec![spec.states_per_agent; spec.agents])?;
    let jas = JointIndex::new(vec![spec.actions; spec.agents])?;
    let n = states.len();
    let entries = n
        .checked_mul(jas.len())
        .and_then(|r| r.checked_mul(n))
        .filter(|&e| e <= DENSE_ENTRY_LIMIT)
        .ok_or_else(|| Error::SizeOverflow(format!("{n} joint states are too many for a dense random kernel")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(entries / n.max(1));
    for _ in 0..n * jas.len() {
        rows.push(random_dist(&mut rng, n).into_iter().enumerate().collect());
    }
    let transition = Kernel::dense_from_rows(n, jas.len(), rows)?;
    let rewards = (0..spec.agents)
        .map(|_| {
            let data = (0..n * spec.actions)
                .map(|_| uniform(&mut rng, spec.reward_scale))
                .collect();
            Table::from_vec(n, spec.actions, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let (discount, horizon, final_rewards) = match spec.mode {
        HorizonMode::Discounted(g) => (Some(g), None, None),
        HorizonMode::Finite(t) => (
            None,
            Some(t),
            Some(
                (0..spec.agents)
                    .map(|_| (0..n).map(|_| uniform(&mut rng, spec.reward_scale)).collect())
                    .collect(),
            ),
        ),
    };
    let initial_dist = random_dist(&mut rng, n);
    MarkovGame::from_parts(GameParts {
        state_sizes: vec![spec.states_per_agent; spec.agents],
        num_actions: spec.actions,
        transition,
        rewards,
        final_rewards,
        initial_dist,
        discount,
        horizon,
        beta: 1.0,
        agent_names: vec![],
        action_names: vec![],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSimplifiedSpec {
    pub agents: usize,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub reward_scale: f64,
    /// Penalty weight of every agent.
    pub mu: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Random occupancy-coupled game with full-support per-agent kernels.
pub fn generate_random_simplified(spec: &RandomSimplifiedSpec) -> Result<SimplifiedGame> {
    let (m, n, na) = (spec.agents, spec.states, spec.actions);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut transitions = Vec::with_capacity(m);
    let mut rewards = Vec::with_capacity(m);
    let mut final_rewards = Vec::with_capacity(m);
    for _ in 0..m {
        let data = (0..n * na).flat_map(|_| random_dist(&mut rng, n)).collect();
        transitions.push(Table::from_vec(n * na, n, data)?);
        let r = (0..n * na).map(|_| uniform(&mut rng, spec.reward_scale)).collect();
        rewards.push(Table::from_vec(n, na, r)?);
        final_rewards.push((0..n).map(|_| uniform(&mut rng, spec.reward_scale)).collect());
    }
    let initial_states = (0..m).map(|_| rng.gen_range(0..n)).collect();
    let game = SimplifiedGame {
        num_states: n,
        num_actions: na,
        rewards,
        final_rewards,
        transitions,
        horizon: spec.horizon,
        beta: spec.beta,
        psi: InteractionFunctional::LinearPenalty {
            weights: vec![spec.mu; m],
        },
        initial_states,
        agent_names: vec![],
        state_names: vec![],
    };
    game.validate()?;
    Ok(game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game;

    fn spec(seed: u64) -> RandomGameSpec {
        RandomGameSpec {
            agents: 2,
            states_per_agent: 2,
            actions: 2,
            mode: HorizonMode::Finite(2),
            reward_scale: 1.0,
            seed,
        }
    }

    #[test]
    fn same_seed_same_game() {
        let a = generate_random_game(&spec(5)).unwrap();
        let b = generate_random_game(&spec(5)).unwrap();
        let c = generate_random_game(&spec(6)).unwrap();
        assert_eq!(a.rewards(), b.rewards());
        assert_eq!(a.transition(), b.transition());
        assert_ne!(a.rewards(), c.rewards());
        assert!(validate_game(&a).is_pass());
        assert!(a.max_reward_norm() <= 1.0);
    }

    #[test]
    fn oversized_games_rejected() {
        let s = RandomGameSpec {
            agents: 4,
            states_per_agent: 10,
            ..spec(0)
        };
        assert!(matches!(generate_random_game(&s), Err(Error::SizeOverflow(_))));
    }
}
