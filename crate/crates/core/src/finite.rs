//! Finite-horizon operator `U_i`, the backward stage-wise solver and the
//! α-mixed inner update `Q ← α U(Q) + (1−α) Q`.
//!
//! `U_i(Q_{-i}, V)(x,a_i) = R_i(x,a_i) + Σ_{a_{-i}} Π_{j≠i} π_j(a_j|x) Σ_{x'} P(x'|x,a⃗) V(x')`,
//! undiscounted. Stage `κ` is solved for its coupled fixed point given the
//! successor values `V^{κ+1}`, then finalized by one more application of `U`
//! and `V^κ_j = E_{π_j}[Q̂_j]`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backup::expected_backup;
use crate::boltzmann::{self, PolicyTable, QFunction};
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::infinite::{check_q_shapes, BoundCheck, Init};
use crate::table::Table;
use crate::trace::SolveTrace;

/// Quantity compared against `epsilon` in the inner loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Fixed-point residual `max_j ‖U_j(Q) − Q_j‖_∞`, independent of `α`.
    #[default]
    FixedPoint,
    /// Step size `max_j ‖Q_j^{s+1} − Q_j^s‖_∞`, which is `α` times the
    /// fixed-point residual.
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgefConfig {
    pub epsilon: f64,
    pub max_inner_iters: usize,
    /// Mixing weight of the fresh operator value, in `(0, 1]`.
    pub alpha: f64,
    pub seed: u64,
    pub init: Init,
    /// Start each stage from the previous stage's last inner iterate.
    pub warm_start: bool,
    #[serde(default)]
    pub stop_rule: StopRule,
}

impl Default for MgefConfig {
    fn default() -> Self {
        MgefConfig {
            epsilon: 1e-8,
            max_inner_iters: 100_000,
            alpha: 1.0,
            seed: 0,
            init: Init::Zeros,
            warm_start: true,
            stop_rule: StopRule::FixedPoint,
        }
    }
}

impl MgefConfig {
    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} must be > 0",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} must be in (0, 1]",
                self.alpha
            )));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::InvalidArgument("max_inner_iters must be >= 1".into()));
        }
        self.init.check()
    }
}

/// Result of one backward stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSolution {
    /// Finalized `Q̂_j^κ`.
    pub q: Vec<QFunction>,
    /// `V_j^κ = E_{Exp_β(Q̂_j)}[Q̂_j]`.
    pub v: Vec<Vec<f64>>,
    /// Last inner iterate, the warm start for the preceding stage.
    pub inner: Vec<Table>,
    pub trace: SolveTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSolution {
    /// `q_by_time[τ][i]` for `τ ∈ [0, T)`.
    pub q_by_time: Vec<Vec<QFunction>>,
    /// `v_by_time[τ][i]` for `τ ∈ [0, T]`; the last entry is `R_{i,F}`.
    pub v_by_time: Vec<Vec<Vec<f64>>>,
    pub policies_by_time: Vec<Vec<PolicyTable>>,
    /// `traces[τ]` is the inner trace of stage `τ`.
    pub traces: Vec<SolveTrace>,
}

impl FiniteSolution {
    pub fn horizon(&self) -> usize {
        self.q_by_time.len()
    }

    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged)
    }

    pub fn total_inner_iters(&self) -> usize {
        self.traces.iter().map(|t| t.sweeps).sum()
    }
}

/// `U_i(Q_{-i}, V^{κ+1})`.
pub fn apply_u(game: &MarkovGame, agent: usize, q_stage: &[QFunction], v_next: &[f64]) -> Result<QFunction> {
    game.require_finite()?;
    check_q_shapes(game, q_stage)?;
    if agent >= game.num_agents() {
        return Err(Error::OutOfRange(format!("agent {agent}")));
    }
    if v_next.len() != game.num_states() {
        return Err(Error::Dimension(format!(
            "successor values have {} entries, game has {} states",
            v_next.len(),
            game.num_states()
        )));
    }
    let tables: Vec<&Table> = q_stage.iter().map(|q| &q.values).collect();
    let policies = opponent_policies(game, &tables);
    Ok(QFunction::new(agent, u_table(game, agent, &policies, v_next)))
}

fn opponent_policies(game: &MarkovGame, q: &[&Table]) -> Vec<Table> {
    q.iter().map(|t| boltzmann::boltzmann_table(t, game.beta())).collect()
}

fn u_table(game: &MarkovGame, agent: usize, policies: &[Table], v_next: &[f64]) -> Table {
    let refs: Vec<&Table> = policies.iter().collect();
    expected_backup(game, agent, game.reward(agent), &refs, v_next, 1.0)
}

/// `max_i{‖R_i‖_∞, ‖R_{i,F}‖_∞} ≤ 1 / (2β(M−1)(1+T))`; `+∞` for one agent.
pub fn check_theorem2_bound(game: &MarkovGame) -> Result<BoundCheck> {
    let t = game.require_finite()?;
    let lhs = game.max_reward_norm().max(game.max_final_reward_norm());
    let rhs = theorem2_rhs(game.beta(), game.num_agents(), t);
    Ok(BoundCheck {
        satisfied: lhs <= rhs,
        lhs,
        rhs,
    })
}

pub fn theorem2_rhs(beta: f64, agents: usize, horizon: usize) -> f64 {
    if agents <= 1 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * beta * (agents - 1) as f64 * (1 + horizon) as f64)
    }
}

/// Convergence condition `γ_αb + (1−α) < 1` of the mixed update, with
/// `b = α·ω` and `γ_αb = 2β(M−1)(1+T)·b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCondition {
    pub satisfied: bool,
    pub gamma_ab: f64,
    pub b: f64,
    pub alpha: f64,
}

pub fn check_alpha_convergence_condition(game: &MarkovGame, alpha: f64) -> Result<AlphaCondition> {
    let t = game.require_finite()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be in (0, 1]")));
    }
    let omega = game.max_reward_norm().max(game.max_final_reward_norm());
    let b = alpha * omega;
    let m = game.num_agents();
    let gamma_ab = 2.0 * game.beta() * m.saturating_sub(1) as f64 * (1 + t) as f64 * b;
    Ok(AlphaCondition {
        satisfied: gamma_ab + (1.0 - alpha) < 1.0,
        gamma_ab,
        b,
        alpha,
    })
}

/// Solves stage `stage` given `v_next[i] = V_i^{stage+1}`.
pub fn solve_stage(
    game: &MarkovGame,
    stage: usize,
    v_next: &[Vec<f64>],
    start: Option<&[Table]>,
    config: &MgefConfig,
) -> Result<StageSolution> {
    let t = game.require_finite()?;
    config.check()?;
    let m = game.num_agents();
    let (n, na) = (game.num_states(), game.num_actions());
    if stage >= t {
        return Err(Error::OutOfRange(format!("stage {stage} of horizon {t}")));
    }
    if v_next.len() != m || v_next.iter().any(|v| v.len() != n) {
        return Err(Error::Dimension(format!(
            "successor values must be {m} vectors of length {n}"
        )));
    }
    let mut q: Vec<Table> = match start {
        Some(s) => {
            if s.len() != m || s.iter().any(|t| t.rows() != n || t.cols() != na) {
                return Err(Error::Dimension("stage start tables".into()));
            }
            s.to_vec()
        }
        None => config.init.tables(config.seed.wrapping_add(stage as u64), m, n, na),
    };

    let started = Instant::now();
    let mut trace = SolveTrace::default();
    let mut converged = false;
    while trace.sweeps < config.max_inner_iters {
        let iter_start = Instant::now();
        let refs: Vec<&Table> = q.iter().collect();
        let policies = opponent_policies(game, &refs);
        let u: Vec<Table> = (0..m).map(|i| u_table(game, i, &policies, &v_next[i])).collect();
        let fixed_point = (0..m).map(|j| u[j].sup_distance(&q[j])).fold(0.0, f64::max);
        let next: Vec<Table> = u.iter().zip(&q).map(|(u, q)| u.mix(q, config.alpha)).collect();
        let residual = match config.stop_rule {
            StopRule::FixedPoint => fixed_point,
            StopRule::Step => (0..m).map(|j| next[j].sup_distance(&q[j])).fold(0.0, f64::max),
        };
        q = next;
        trace.record(residual, iter_start);
        if !residual.is_finite() {
            break;
        }
        if residual < config.epsilon {
            converged = true;
            break;
        }
    }
    trace.finish(converged, started);

    let refs: Vec<&Table> = q.iter().collect();
    let policies = opponent_policies(game, &refs);
    let q_hat: Vec<QFunction> = (0..m)
        .map(|i| QFunction::new(i, u_table(game, i, &policies, &v_next[i])).at_time(stage))
        .collect();
    let v = q_hat
        .iter()
        .map(|qi| boltzmann::self_soft_values(&qi.values, game.beta()))
        .collect();
    Ok(StageSolution {
        q: q_hat,
        v,
        inner: q,
        trace,
    })
}

/// Backward recursion over all stages from `V^T = R_F`.
pub fn solve_mge_f(game: &MarkovGame, config: &MgefConfig) -> Result<FiniteSolution> {
    let t = game.require_finite()?;
    config.check()?;
    let m = game.num_agents();
    let beta = game.beta();
    let mut v_by_time = vec![Vec::new(); t + 1];
    v_by_time[t] = (0..m).map(|i| game.final_reward(i)).collect();
    let mut q_by_time = vec![Vec::new(); t];
    let mut policies_by_time = vec![Vec::new(); t];
    let mut traces = vec![SolveTrace::default(); t];
    let mut carried: Option<Vec<Table>> = None;
    for kappa in (0..t).rev() {
        let start = if config.warm_start { carried.as_deref() } else { None };
        let stage = solve_stage(game, kappa, &v_by_time[kappa + 1], start, config)?;
        policies_by_time[kappa] = stage
            .q
            .iter()
            .map(|qi| PolicyTable {
                agent: qi.agent,
                time_step: Some(kappa),
                probs: boltzmann::boltzmann_table(&qi.values, beta),
            })
            .collect();
        v_by_time[kappa] = stage.v;
        q_by_time[kappa] = stage.q;
        traces[kappa] = stage.trace;
        carried = Some(stage.inner);
    }
    Ok(FiniteSolution {
        q_by_time,
        v_by_time,
        policies_by_time,
        traces,
    })
}

/// `max_i ‖U_i(Q_{-i}, V^{κ+1}) − Q_i‖_∞` for the stage tables `q_stage`.
pub fn stage_fixed_point_residual(game: &MarkovGame, q_stage: &[QFunction], v_next: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in q_stage {
        let u = apply_u(game, q.agent, q_stage, &v_next[q.agent])?;
        worst = worst.max(u.values.sup_distance(&q.values));
    }
    Ok(worst)
}
