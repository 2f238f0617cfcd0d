//! Multi-agent maximum causal entropy: the softmax backward recursion, the
//! dual gradient and the online feature-matching loop.
//!
//! A game shell with horizon `H` has decision steps `τ ∈ [0, H)`. With
//! `r_i = ⟨θ_i, F_i⟩`,
//!
//! * `W_i^{H−1} = r_i`,
//! * `W_i^τ = r_i + E_{π_{-i}^τ, P}[log Z_i^{τ+1}]`,
//! * `log Z_i^τ(x) = log Σ_a exp W_i^τ(x,a)`, `π_i^τ = exp(W_i^τ − log Z_i^τ)`.
//!
//! At each `τ` the agents' `W` tables are coupled through `π_{-i}^τ` and are
//! solved jointly by Jacobi iteration. The recursion runs at unit
//! temperature whatever the game's `β`.

use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backup::expected_backup;
use crate::boltzmann::{self, log_sum_exp};
use crate::error::{Error, Result};
use crate::finite::{solve_mge_f, MgefConfig};
use crate::game::{HorizonMode, MarkovGame};
use crate::table::Table;
use crate::trace::{fmt_f64, SolveTrace};

/// Feature map `F_i(x, a_i)` of one agent, rows `x * |A| + a_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentFeatures {
    pub num_actions: usize,
    pub values: Table,
}

/// Built-in feature families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// One-hot of the agent's own state component.
    OwnState,
    /// One-hot of (own state component, own action).
    OwnStateAction,
    /// One-hot of the flat joint state.
    JointState,
}

impl AgentFeatures {
    pub fn from_fn(states: usize, actions: usize, dim: usize, f: impl Fn(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut values = Table::zeros(states * actions, dim);
        for x in 0..states {
            for a in 0..actions {
                let v = f(x, a);
                if v.len() != dim {
                    return Err(Error::Dimension(format!("feature of length {} != {dim}", v.len())));
                }
                if v.iter().any(|e| !e.is_finite()) {
                    return Err(Error::NonFinite(format!("feature at state {x}, action {a}")));
                }
                values.row_mut(x * actions + a).copy_from_slice(&v);
            }
        }
        Ok(AgentFeatures {
            num_actions: actions,
            values,
        })
    }

    pub fn of_kind(game: &MarkovGame, agent: usize, kind: FeatureKind) -> Result<Self> {
        let (n, na) = (game.num_states(), game.num_actions());
        let own = game.state_sizes()[agent];
        let (dim, index): (usize, Box<dyn Fn(usize, usize) -> usize>) = match kind {
            FeatureKind::OwnState => (own, Box::new(|x, _| game.states().component(x, agent))),
            FeatureKind::OwnStateAction => (own * na, Box::new(|x, a| game.states().component(x, agent) * na + a)),
            FeatureKind::JointState => (n, Box::new(|x, _| x)),
        };
        Self::from_fn(n, na, dim, |x, a| {
            let mut v = vec![0.0; dim];
            v[index(x, a)] = 1.0;
            v
        })
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn at(&self, x: usize, a: usize) -> &[f64] {
        self.values.row(x * self.num_actions + a)
    }

    /// `r(x, a) = ⟨θ, F(x, a)⟩`.
    pub fn reward_table(&self, theta: &[f64]) -> Table {
        let states = self.values.rows() / self.num_actions;
        let mut r = Table::zeros(states, self.num_actions);
        for x in 0..states {
            for a in 0..self.num_actions {
                r.set(x, a, boltzmann::dot(theta, self.at(x, a)));
            }
        }
        r
    }
}

/// Per-agent features and weights with the projected-gradient settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub features: Vec<AgentFeatures>,
    pub theta: Vec<Vec<f64>>,
    /// Radius of the Euclidean ball `θ_j` is projected onto.
    pub radius: f64,
    pub step_size: f64,
}

impl FeatureModel {
    /// Zero weights, radius 10, step size 0.05.
    pub fn new(features: Vec<AgentFeatures>) -> Self {
        let theta = features.iter().map(|f| vec![0.0; f.dim()]).collect();
        FeatureModel {
            features,
            theta,
            radius: 10.0,
            step_size: 0.05,
        }
    }

    pub fn of_kind(game: &MarkovGame, kind: FeatureKind) -> Result<Self> {
        let features = (0..game.num_agents())
            .map(|i| AgentFeatures::of_kind(game, i, kind))
            .collect::<Result<_>>()?;
        Ok(Self::new(features))
    }

    pub fn reward_tables(&self) -> Vec<Table> {
        self.features
            .iter()
            .zip(&self.theta)
            .map(|(f, t)| f.reward_table(t))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmceConfig {
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for MmceConfig {
    fn default() -> Self {
        MmceConfig {
            tolerance: 1e-9,
            max_iters: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmceSolution {
    /// `w[τ][i]`.
    pub w: Vec<Vec<Table>>,
    /// `log_z[τ][i]`.
    pub log_z: Vec<Vec<Vec<f64>>>,
    /// `policies[τ][i]`.
    pub policies: Vec<Vec<Table>>,
    /// Inner Jacobi trace of every step.
    pub traces: Vec<SolveTrace>,
}

fn softmax_parts(w: &Table) -> (Vec<f64>, Table) {
    let log_z: Vec<f64> = w.iter_rows().map(log_sum_exp).collect();
    let mut pi = Table::zeros(w.rows(), w.cols());
    for x in 0..w.rows() {
        for (p, &v) in pi.row_mut(x).iter_mut().zip(w.row(x)) {
            *p = (v - log_z[x]).exp();
        }
        let s: f64 = pi.row(x).iter().sum();
        pi.row_mut(x).iter_mut().for_each(|p| *p /= s);
    }
    (log_z, pi)
}

fn check_rewards(game: &MarkovGame, rewards: &[Table]) -> Result<()> {
    if rewards.len() != game.num_agents()
        || rewards
            .iter()
            .any(|r| r.rows() != game.num_states() || r.cols() != game.num_actions())
    {
        return Err(Error::Dimension("one |X| x |A| reward table per agent expected".into()));
    }
    Ok(())
}

/// Softmax recursion with rewards `⟨θ_i, F_i⟩`.
pub fn mmce_backward(game: &MarkovGame, model: &FeatureModel, config: &MmceConfig) -> Result<MmceSolution> {
    mmce_backward_rewards(game, &model.reward_tables(), config)
}

/// Softmax recursion with explicit per-agent rewards.
pub fn mmce_backward_rewards(game: &MarkovGame, rewards: &[Table], config: &MmceConfig) -> Result<MmceSolution> {
    let h = game.require_finite()?;
    check_rewards(game, rewards)?;
    let m = game.num_agents();
    let n = game.num_states();
    let mut w = vec![Vec::new(); h];
    let mut log_z = vec![Vec::new(); h];
    let mut policies = vec![Vec::new(); h];
    let mut traces = vec![SolveTrace::default(); h];
    let mut z_next = vec![vec![0.0; n]; m];
    for tau in (0..h).rev() {
        let started = Instant::now();
        let mut trace = SolveTrace::default();
        let mut cur: Vec<Table> = rewards.to_vec();
        let mut parts: Vec<(Vec<f64>, Table)> = cur.iter().map(softmax_parts).collect();
        if tau + 1 < h {
            let mut converged = false;
            while trace.sweeps < config.max_iters {
                let it = Instant::now();
                let pis: Vec<&Table> = parts.iter().map(|p| &p.1).collect();
                let next: Vec<Table> = (0..m)
                    .map(|i| expected_backup(game, i, &rewards[i], &pis, &z_next[i], 1.0))
                    .collect();
                let residual = next
                    .iter()
                    .zip(&cur)
                    .map(|(a, b)| a.sup_distance(b))
                    .fold(0.0, f64::max);
                cur = next;
                parts = cur.iter().map(softmax_parts).collect();
                trace.record(residual, it);
                if residual < config.tolerance {
                    converged = true;
                    break;
                }
                if !residual.is_finite() {
                    break;
                }
            }
            trace.finish(converged, started);
        } else {
            trace.finish(true, started);
        }
        let (zs, pis): (Vec<Vec<f64>>, Vec<Table>) = parts.into_iter().unzip();
        z_next = zs.clone();
        w[tau] = cur;
        log_z[tau] = zs;
        policies[tau] = pis;
        traces[tau] = trace;
    }
    Ok(MmceSolution {
        w,
        log_z,
        policies,
        traces,
    })
}

/// Distribution over joint states at every `τ ∈ [0, policies.len()]`,
/// starting from `P0`.
pub fn state_distributions(game: &MarkovGame, policies: &[Vec<Table>]) -> Result<Vec<Vec<f64>>> {
    let (n, m, na) = (game.num_states(), game.num_agents(), game.num_actions());
    let mut d = game.initial_dist().to_vec();
    let mut out = Vec::with_capacity(policies.len() + 1);
    let mut comps = vec![0usize; m];
    for pis in policies {
        if pis.len() != m || pis.iter().any(|p| p.rows() != n || p.cols() != na) {
            return Err(Error::Dimension("policy tables".into()));
        }
        let mut next = vec![0.0; n];
        for (x, &dx) in d.iter().enumerate() {
            if dx == 0.0 {
                continue;
            }
            comps.iter_mut().for_each(|c| *c = 0);
            for ja in 0..game.num_joint_actions() {
                let w: f64 = comps.iter().enumerate().map(|(i, &a)| pis[i].get(x, a)).product();
                if w != 0.0 {
                    for (y, p) in game.transition().row(x, ja).iter() {
                        next[y] += dx * w * p;
                    }
                }
                for k in (0..m).rev() {
                    comps[k] += 1;
                    if comps[k] < na {
                        break;
                    }
                    comps[k] = 0;
                }
            }
        }
        out.push(std::mem::replace(&mut d, next));
    }
    out.push(d);
    Ok(out)
}

/// `E[Σ_τ F_j(x_τ, a_{j,τ})]` under `P0`, the policies and the kernel.
pub fn model_feature_expectation(
    game: &MarkovGame,
    policies: &[Vec<Table>],
    features: &AgentFeatures,
    agent: usize,
) -> Result<Vec<f64>> {
    if agent >= game.num_agents() {
        return Err(Error::OutOfRange(format!("agent {agent}")));
    }
    let dists = state_distributions(game, policies)?;
    let mut e = vec![0.0; features.dim()];
    for (tau, pis) in policies.iter().enumerate() {
        for (x, &dx) in dists[tau].iter().enumerate() {
            if dx == 0.0 {
                continue;
            }
            for (a, &pa) in pis[agent].row(x).iter().enumerate() {
                for (ek, fk) in e.iter_mut().zip(features.at(x, a)) {
                    *ek += dx * pa * fk;
                }
            }
        }
    }
    Ok(e)
}

/// One observed `(state, action)` pair; `action` is absent on the final
/// state of an episode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub t: usize,
    pub state: Vec<usize>,
    pub action: Option<Vec<usize>>,
}

/// Demonstrations as one record list per episode.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub episodes: Vec<Vec<TrajectoryRecord>>,
}

impl TrajectoryLog {
    /// Reads line-delimited JSON records, grouping by episode id (in order
    /// of first appearance) and sorting each episode by `t`.
    pub fn read_jsonl<R: BufRead>(reader: R, label: &str) -> Result<Self> {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: std::collections::HashMap<usize, Vec<TrajectoryRecord>> = Default::default();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: label.to_string(),
                message: format!("line {}: {e}", k + 1),
            })?;
            groups
                .entry(rec.episode)
                .or_insert_with(|| {
                    order.push(rec.episode);
                    Vec::new()
                })
                .push(rec);
        }
        let episodes = order
            .into_iter()
            .map(|e| {
                let mut ep = groups.remove(&e).unwrap_or_default();
                ep.sort_by_key(|r| r.t);
                ep
            })
            .collect();
        Ok(TrajectoryLog { episodes })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in self.episodes.iter().flatten() {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.iter().all(|e| e.is_empty())
    }

    /// Checks indices against the game and episode lengths against its
    /// horizon.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        let limit = game.horizon().map(|h| h + 1);
        for ep in &self.episodes {
            if let Some(l) = limit {
                if ep.len() > l {
                    return Err(Error::InvalidArgument(format!(
                        "episode {} has {} records, horizon allows {l}",
                        ep[0].episode,
                        ep.len()
                    )));
                }
            }
            for r in ep {
                game.states().flatten(&r.state)?;
                if let Some(a) = &r.action {
                    game.joint_actions().flatten(a)?;
                }
            }
        }
        Ok(())
    }
}

/// Mean over episodes of `Σ_{records with an action} F_j(x, a_j)`.
pub fn empirical_feature_expectation(
    game: &MarkovGame,
    log: &TrajectoryLog,
    features: &AgentFeatures,
    agent: usize,
) -> Result<Vec<f64>> {
    if log.episodes.is_empty() {
        return Err(Error::Empty("trajectory log".into()));
    }
    let mut e = vec![0.0; features.dim()];
    for rec in log.episodes.iter().flatten() {
        if let Some(a) = &rec.action {
            let x = game.states().flatten(&rec.state)?;
            let aj = *a
                .get(agent)
                .ok_or_else(|| Error::OutOfRange(format!("agent {agent} in joint action")))?;
            if aj >= game.num_actions() {
                return Err(Error::OutOfRange(format!("action {aj}")));
            }
            for (ek, fk) in e.iter_mut().zip(features.at(x, aj)) {
                *ek += fk;
            }
        }
    }
    let k = log.episodes.len() as f64;
    e.iter_mut().for_each(|v| *v /= k);
    Ok(e)
}

/// `Ê − E`.
pub fn dual_gradient(empirical: &[f64], model: &[f64]) -> Result<Vec<f64>> {
    if empirical.len() != model.len() {
        return Err(Error::Dimension(format!(
            "empirical has {} entries, model {}",
            empirical.len(),
            model.len()
        )));
    }
    Ok(empirical.iter().zip(model).map(|(e, m)| e - m).collect())
}

/// Dual of agent `agent` with the opponents' policies frozen:
/// `⟨θ_j, Ê_j⟩ − E_{P0}[log Z_j^0]`, where `log Z_j` follows the softmax
/// recursion for `j` alone. Its gradient in `θ_j` is `Ê_j − E_j[F_j]`.
pub fn dual_objective(
    game: &MarkovGame,
    features: &AgentFeatures,
    theta: &[f64],
    agent: usize,
    opponent_policies: &[Vec<Table>],
    empirical: &[f64],
) -> Result<f64> {
    let h = game.require_finite()?;
    if opponent_policies.len() != h {
        return Err(Error::Dimension(format!(
            "{} policy steps for horizon {h}",
            opponent_policies.len()
        )));
    }
    if theta.len() != features.dim() || empirical.len() != features.dim() {
        return Err(Error::Dimension("theta, features and empirical expectation".into()));
    }
    let r = features.reward_table(theta);
    let mut z = vec![0.0; game.num_states()];
    for tau in (0..h).rev() {
        let pis: Vec<&Table> = opponent_policies[tau].iter().collect();
        let w = expected_backup(game, agent, &r, &pis, &z, if tau + 1 < h { 1.0 } else { 0.0 });
        z = w.iter_rows().map(log_sum_exp).collect();
    }
    let expected_log_z: f64 = game.initial_dist().iter().zip(&z).map(|(p, v)| p * v).sum();
    Ok(boltzmann::dot(theta, empirical) - expected_log_z)
}

/// `θ` rescaled onto the Euclidean ball of radius `radius` when outside it.
pub fn project_ball(theta: &[f64], radius: f64) -> Vec<f64> {
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        theta.to_vec()
    } else {
        theta.iter().map(|v| v * radius / norm).collect()
    }
}

/// Equilibrium model used to predict the opponents' behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardModel {
    /// Finite-horizon Boltzmann equilibrium at `β = 1`, zero final rewards.
    MgeF,
    /// The softmax recursion itself.
    Softmax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlConfig {
    /// The agent that knows its own reward and learns everybody else's.
    pub observer: usize,
    pub forward: ForwardModel,
    pub solver: MgefConfig,
    pub mmce: MmceConfig,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            observer: 0,
            forward: ForwardModel::MgeF,
            solver: MgefConfig {
                epsilon: 1e-10,
                max_inner_iters: 10_000,
                ..MgefConfig::default()
            },
            mmce: MmceConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlStep {
    /// `F̃_j − F̄_j` before the update, empty for the observer.
    pub gaps: Vec<Vec<f64>>,
    pub gap_norms: Vec<f64>,
    /// Whether the inner equilibrium solve converged.
    pub converged: bool,
}

/// Predicted per-step policies `[τ][i]` with the opponents' rewards taken
/// from `model` and the observer's reward `own_reward`.
pub fn predict_policies(
    game: &MarkovGame,
    model: &FeatureModel,
    own_reward: &Table,
    config: &IrlConfig,
) -> Result<(Vec<Vec<Table>>, bool)> {
    let h = game.require_finite()?;
    let mut rewards = model.reward_tables();
    if config.observer >= rewards.len() {
        return Err(Error::OutOfRange(format!("observer {}", config.observer)));
    }
    rewards[config.observer] = own_reward.clone();
    match config.forward {
        ForwardModel::MgeF => {
            let zeros = vec![vec![0.0; game.num_states()]; game.num_agents()];
            let shell = game
                .with_horizon_mode(HorizonMode::Finite(h))
                .with_beta(1.0)
                .with_rewards(rewards, Some(zeros))?;
            let sol = solve_mge_f(&shell, &config.solver)?;
            let converged = sol.converged();
            let pis = sol
                .policies_by_time
                .into_iter()
                .map(|per| per.into_iter().map(|p| p.probs).collect())
                .collect();
            Ok((pis, converged))
        }
        ForwardModel::Softmax => {
            let sol = mmce_backward_rewards(game, &rewards, &config.mmce)?;
            let converged = sol.traces.iter().all(|t| t.converged);
            Ok((sol.policies, converged))
        }
    }
}

/// One projected step `θ_j ← Π_B(θ_j + ϱ(F̃_j − F̄_j))` for every `j` other
/// than the observer, with `targets[j] = F̃_j`.
pub fn irl_step_with_targets(
    game: &MarkovGame,
    targets: &[Vec<f64>],
    model: &mut FeatureModel,
    own_reward: &Table,
    config: &IrlConfig,
) -> Result<IrlStep> {
    let m = game.num_agents();
    if targets.len() != m || model.features.len() != m {
        return Err(Error::Dimension("one target and feature map per agent".into()));
    }
    let (policies, converged) = predict_policies(game, model, own_reward, config)?;
    let mut gaps = vec![Vec::new(); m];
    let mut gap_norms = vec![0.0; m];
    for j in (0..m).filter(|&j| j != config.observer) {
        let predicted = model_feature_expectation(game, &policies, &model.features[j], j)?;
        let g = dual_gradient(&targets[j], &predicted)?;
        gap_norms[j] = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let stepped: Vec<f64> = model.theta[j]
            .iter()
            .zip(&g)
            .map(|(t, d)| t + model.step_size * d)
            .collect();
        model.theta[j] = project_ball(&stepped, model.radius);
        gaps[j] = g;
    }
    Ok(IrlStep {
        gaps,
        gap_norms,
        converged,
    })
}

/// [`irl_step_with_targets`] with targets estimated from `log`.
pub fn online_mmce_irl_step(
    game: &MarkovGame,
    log: &TrajectoryLog,
    model: &mut FeatureModel,
    own_reward: &Table,
    config: &IrlConfig,
) -> Result<IrlStep> {
    let targets = (0..game.num_agents())
        .map(|j| empirical_feature_expectation(game, log, &model.features[j], j))
        .collect::<Result<Vec<_>>>()?;
    irl_step_with_targets(game, &targets, model, own_reward, config)
}

/// Writes `step,agent,coord,theta,gap_norm` rows for a history of weights,
/// `history[s]` holding all agents' weights after step `s` and
/// `gap_norms[s]` the gaps measured during that step.
pub fn write_theta_history<W: Write>(history: &[Vec<Vec<f64>>], gap_norms: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "agent", "coord", "theta", "gap_norm"])?;
    for (s, thetas) in history.iter().enumerate() {
        for (j, theta) in thetas.iter().enumerate() {
            let gap = gap_norms.get(s).and_then(|g| g.get(j)).copied().unwrap_or(0.0);
            for (k, v) in theta.iter().enumerate() {
                w.write_record([s.to_string(), j.to_string(), k.to_string(), fmt_f64(*v), fmt_f64(gap)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
