//! Executing solved policies in a Markov game.
//!
//! Episode `e` draws all its randomness from a ChaCha8 stream seeded by the
//! config seed with stream id `e`, so episodes are independent and the
//! report is a pure function of the config.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boltzmann::{argmax_with_tolerance, PolicyTable};
use crate::envs::EventDetector;
use crate::error::{Error, Result};
use crate::game::{HorizonMode, MarkovGame};
use crate::irl::{TrajectoryLog, TrajectoryRecord};

/// Probabilities within this margin of the row maximum count as ties.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// Most probable action, lowest index among ties.
    Argmax,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Joint-state components.
    Fixed(Vec<usize>),
    RandomFromP0,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub execution: Execution,
    pub episodes: usize,
    pub seed: u64,
    pub initial_state: InitialState,
    /// Episode length; defaults to the horizon of a finite game and is
    /// required for discounted games.
    pub steps: Option<usize>,
}

/// Policies for every decision step.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySchedule {
    /// `policies[i]`.
    Stationary(Vec<PolicyTable>),
    /// `policies[τ][i]`.
    TimeIndexed(Vec<Vec<PolicyTable>>),
}

impl PolicySchedule {
    fn at(&self, tau: usize) -> &[PolicyTable] {
        match self {
            PolicySchedule::Stationary(p) => p,
            PolicySchedule::TimeIndexed(p) => &p[tau],
        }
    }

    fn covers(&self, steps: usize) -> bool {
        match self {
            PolicySchedule::Stationary(_) => true,
            PolicySchedule::TimeIndexed(p) => p.len() >= steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// Joint-state components for `τ ∈ [0, steps]`.
    pub states: Vec<Vec<usize>>,
    /// Joint actions for `τ ∈ [0, steps)`.
    pub actions: Vec<Vec<usize>>,
    /// Per-agent total reward, final reward included.
    pub totals: Vec<f64>,
    /// Per detector, the number of visited states where it fired.
    pub events: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub agent_names: Vec<String>,
    pub event_names: Vec<String>,
    pub mean_totals: Vec<f64>,
    pub event_counts: Vec<usize>,
    pub episodes: Vec<Episode>,
}

pub fn run_rollouts(
    game: &MarkovGame,
    policies: &PolicySchedule,
    config: &RolloutConfig,
    detectors: &[EventDetector],
) -> Result<RolloutReport> {
    if config.episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be >= 1".into()));
    }
    let (steps, final_rewards) = match game.horizon_mode()? {
        HorizonMode::Finite(t) => (config.steps.unwrap_or(t), true),
        HorizonMode::Discounted(_) => (
            config.steps.ok_or_else(|| {
                Error::InvalidArgument("rollouts of a discounted game need an explicit step count".into())
            })?,
            false,
        ),
    };
    if !policies.covers(steps) {
        return Err(Error::Dimension(format!("policies do not cover {steps} steps")));
    }
    for tau in 0..steps {
        let p = policies.at(tau);
        if p.len() != game.num_agents()
            || p.iter()
                .any(|t| t.probs.rows() != game.num_states() || t.probs.cols() != game.num_actions())
        {
            return Err(Error::Dimension(format!("policy tables at step {tau}")));
        }
    }
    let start = match &config.initial_state {
        InitialState::Fixed(c) => Some(game.states().flatten(c)?),
        InitialState::RandomFromP0 => None,
    };
    let p0 = WeightedIndex::new(game.initial_dist())
        .map_err(|e| Error::InvalidArgument(format!("initial distribution: {e}")))?;

    let episodes = (0..config.episodes)
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(e as u64);
            let x0 = start.unwrap_or_else(|| p0.sample(&mut rng));
            run_episode(
                game,
                policies,
                config.execution,
                steps,
                final_rewards,
                x0,
                detectors,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let m = game.num_agents();
    let k = episodes.len() as f64;
    let mean_totals = (0..m)
        .map(|i| episodes.iter().map(|ep| ep.totals[i]).sum::<f64>() / k)
        .collect();
    let event_counts = (0..detectors.len())
        .map(|d| episodes.iter().map(|ep| ep.events[d]).sum())
        .collect();
    Ok(RolloutReport {
        agent_names: game.agent_names().to_vec(),
        event_names: detectors.iter().map(|d| d.name.clone()).collect(),
        mean_totals,
        event_counts,
        episodes,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    game: &MarkovGame,
    policies: &PolicySchedule,
    execution: Execution,
    steps: usize,
    final_rewards: bool,
    start: usize,
    detectors: &[EventDetector],
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    let m = game.num_agents();
    let mut x = start;
    let mut totals = vec![0.0; m];
    let mut events = vec![0; detectors.len()];
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps);
    let visit = |flat: usize, events: &mut Vec<usize>| {
        let comps = game.states().unflatten(flat);
        for (count, d) in events.iter_mut().zip(detectors) {
            if (d.detect)(&comps) {
                *count += 1;
            }
        }
        comps
    };
    for tau in 0..steps {
        states.push(visit(x, &mut events));
        let joint: Vec<usize> = policies
            .at(tau)
            .iter()
            .map(|p| choose(p.row(x), execution, rng))
            .collect::<Result<_>>()?;
        for (i, total) in totals.iter_mut().enumerate() {
            *total += game.reward(i).get(x, joint[i]);
        }
        let ja = game.joint_actions().flatten(&joint)?;
        let next: Vec<(usize, f64)> = game.transition().row(x, ja).iter().filter(|e| e.1 > 0.0).collect();
        x = if next.len() == 1 {
            next[0].0
        } else {
            let w = WeightedIndex::new(next.iter().map(|e| e.1))
                .map_err(|e| Error::InvalidArgument(format!("transition row: {e}")))?;
            next[w.sample(rng)].0
        };
        actions.push(joint);
    }
    states.push(visit(x, &mut events));
    if final_rewards {
        for (i, total) in totals.iter_mut().enumerate() {
            if let Some(f) = game.final_rewards() {
                *total += f[i][x];
            }
        }
    }
    Ok(Episode {
        states,
        actions,
        totals,
        events,
    })
}

fn choose(row: &[f64], execution: Execution, rng: &mut ChaCha8Rng) -> Result<usize> {
    match execution {
        Execution::Argmax => Ok(argmax_with_tolerance(row, ARGMAX_TIE_TOL)),
        Execution::Sample => Ok(WeightedIndex::new(row)
            .map_err(|e| Error::InvalidArgument(format!("policy row: {e}")))?
            .sample(rng)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentScore {
    pub agent: String,
    pub mean: f64,
    /// Sample standard deviation, zero for a single episode.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRate {
    pub event: String,
    pub total: usize,
    pub per_episode: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub episodes: usize,
    pub agents: Vec<AgentScore>,
    pub events: Vec<EventRate>,
}

pub fn score_summary(report: &RolloutReport) -> Result<ScoreSummary> {
    let k = report.episodes.len();
    if k == 0 {
        return Err(Error::Empty("rollout report has no episodes".into()));
    }
    let agents = report
        .agent_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mean = report.mean_totals[i];
            let std = if k > 1 {
                let ss: f64 = report.episodes.iter().map(|e| (e.totals[i] - mean).powi(2)).sum();
                (ss / (k - 1) as f64).sqrt()
            } else {
                0.0
            };
            AgentScore {
                agent: name.clone(),
                mean,
                std,
            }
        })
        .collect();
    let events = report
        .event_names
        .iter()
        .zip(&report.event_counts)
        .map(|(name, &total)| EventRate {
            event: name.clone(),
            total,
            per_episode: total as f64 / k as f64,
        })
        .collect();
    Ok(ScoreSummary {
        episodes: k,
        agents,
        events,
    })
}

impl RolloutReport {
    /// Trajectories in the format the IRL loop consumes.
    pub fn to_trajectory_log(&self) -> TrajectoryLog {
        TrajectoryLog {
            episodes: self
                .episodes
                .iter()
                .enumerate()
                .map(|(e, ep)| {
                    ep.states
                        .iter()
                        .enumerate()
                        .map(|(t, s)| TrajectoryRecord {
                            episode: e,
                            t,
                            state: s.clone(),
                            action: ep.actions.get(t).cloned(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_markov, events_for, EnvParams};
    use crate::finite::{solve_mge_f, MgefConfig};
    use crate::table::Table;

    fn uniform(game: &MarkovGame) -> PolicySchedule {
        PolicySchedule::Stationary(
            (0..game.num_agents())
                .map(|i| PolicyTable {
                    agent: i,
                    time_step: None,
                    probs: Table::filled(game.num_states(), game.num_actions(), 1.0 / game.num_actions() as f64),
                })
                .collect(),
        )
    }

    fn config(execution: Execution, episodes: usize, initial_state: InitialState) -> RolloutConfig {
        RolloutConfig {
            execution,
            episodes,
            seed: 11,
            initial_state,
            steps: None,
        }
    }

    #[test]
    fn argmax_on_deterministic_game_repeats() {
        let g = build_markov("grid-1", &EnvParams::default()).unwrap();
        let sol = solve_mge_f(&g, &MgefConfig::default()).unwrap();
        let sched = PolicySchedule::TimeIndexed(sol.policies_by_time);
        let cfg = config(Execution::Argmax, 3, InitialState::Fixed(vec![6, 8]));
        let r = run_rollouts(&g, &sched, &cfg, &events_for("grid-1")).unwrap();
        assert_eq!(r.episodes[0], r.episodes[1]);
        assert_eq!(r.episodes[1], r.episodes[2]);
        assert_eq!(r.episodes[0].states.len(), 9);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let g = build_markov("grid-2", &EnvParams::default()).unwrap();
        let cfg = config(Execution::Sample, 10, InitialState::RandomFromP0);
        let a = run_rollouts(&g, &uniform(&g), &cfg, &events_for("grid-2")).unwrap();
        let b = run_rollouts(&g, &uniform(&g), &cfg, &events_for("grid-2")).unwrap();
        assert_eq!(a, b);
        let other = RolloutConfig { seed: 12, ..cfg };
        let c = run_rollouts(&g, &uniform(&g), &other, &events_for("grid-2")).unwrap();
        assert_ne!(a.episodes, c.episodes);
        let mean0 = a.episodes.iter().map(|e| e.totals[0]).sum::<f64>() / 10.0;
        assert_eq!(a.mean_totals[0], mean0);
    }

    #[test]
    fn zero_episodes_rejected() {
        let g = build_markov("grid-2", &EnvParams::default()).unwrap();
        let cfg = config(Execution::Sample, 0, InitialState::RandomFromP0);
        assert!(run_rollouts(&g, &uniform(&g), &cfg, &[]).is_err());
    }

    #[test]
    fn summary_statistics() {
        let ep = |v: f64| Episode {
            states: vec![],
            actions: vec![],
            totals: vec![v],
            events: vec![],
        };
        let mut r = RolloutReport {
            agent_names: vec!["a".into()],
            event_names: vec![],
            mean_totals: vec![2.0],
            event_counts: vec![],
            episodes: vec![ep(1.0), ep(3.0)],
        };
        let s = score_summary(&r).unwrap();
        assert_eq!(s.agents[0].mean, 2.0);
        assert!((s.agents[0].std - 2f64.sqrt()).abs() < 1e-15);
        r.episodes.truncate(1);
        r.mean_totals = vec![1.0];
        assert_eq!(score_summary(&r).unwrap().agents[0].std, 0.0);
    }
}
