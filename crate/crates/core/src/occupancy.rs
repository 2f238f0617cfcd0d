//! Occupancy-coupled simplified game and its forward-backward solver.
//!
//! Every agent moves on the same state set `X` with its own kernel
//! `P_i(x'|x,a)`. Agents interact only through the penalty
//! `Ψ(O_{-i}^τ)(x)` added to agent `i`'s reward, where `O_j^τ` is agent
//! `j`'s occupancy measure at time `τ`:
//!
//! * backward: `Q̃_i^τ = R_i + Ψ(O_{-i}^τ) + P_i Ṽ_i^{τ+1}`, `Ṽ_i^T = R_{i,F}`;
//! * forward: `O_i^{τ+1}(x) = Σ_{x',a} π̃_i^τ(a|x') P_i(x|x',a) O_i^τ(x')`,
//!   `O_i^0 = δ_{x_i^0}`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boltzmann::{self, argmax_with_tolerance};
use crate::error::{Error, Result};
use crate::infinite::Init;
use crate::table::Table;
use crate::trace::{fmt_f64, SolveTrace};
use crate::PROB_TOL;

/// Penalty an agent receives from the other agents' occupancies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionFunctional {
    /// `Ψ(O_{-i})(x) = −Σ_{j≠i} μ_j O_j(x)`, `weights[j] = μ_j`.
    LinearPenalty { weights: Vec<f64> },
}

impl InteractionFunctional {
    /// Lipschitz constant of `Ψ` from the `ℓ1` distance of opponent
    /// occupancies to the sup norm of the penalty.
    pub fn lipschitz(&self) -> f64 {
        match self {
            InteractionFunctional::LinearPenalty { weights } => weights.iter().sum(),
        }
    }

    /// Sup-norm bound of `Ψ` over occupancy distributions.
    pub fn sup_bound(&self) -> f64 {
        self.lipschitz()
    }
}

/// `Ψ(O_{-agent})` with `occupancies[j]` the distribution of agent `j`.
pub fn apply_psi(psi: &InteractionFunctional, agent: usize, occupancies: &[&[f64]]) -> Result<Vec<f64>> {
    let n = occupancies.first().map_or(0, |o| o.len());
    if occupancies.iter().any(|o| o.len() != n) {
        return Err(Error::Dimension("occupancy vectors of different lengths".into()));
    }
    match psi {
        InteractionFunctional::LinearPenalty { weights } => {
            if weights.len() != occupancies.len() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} agents",
                    weights.len(),
                    occupancies.len()
                )));
            }
            let mut out = vec![0.0; n];
            for (j, (o, &mu)) in occupancies.iter().zip(weights).enumerate() {
                if j == agent || mu == 0.0 {
                    continue;
                }
                for (p, &oj) in out.iter_mut().zip(o.iter()) {
                    *p -= mu * oj;
                }
            }
            Ok(out)
        }
    }
}

/// One agent's distribution over `X` at time `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub agent: usize,
    pub time_step: usize,
    pub dist: Vec<f64>,
}

/// Agents with private dynamics on a shared state set, coupled through `Ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedGame {
    pub num_states: usize,
    pub num_actions: usize,
    /// `rewards[i]` is `|X| x |A|`.
    pub rewards: Vec<Table>,
    /// `final_rewards[i]` has one entry per state.
    pub final_rewards: Vec<Vec<f64>>,
    /// `transitions[i]` has rows `x * |A| + a` and one column per next state.
    pub transitions: Vec<Table>,
    pub horizon: usize,
    pub beta: f64,
    pub psi: InteractionFunctional,
    pub initial_states: Vec<usize>,
    pub agent_names: Vec<String>,
    pub state_names: Vec<String>,
}

impl SimplifiedGame {
    pub fn num_agents(&self) -> usize {
        self.rewards.len()
    }

    /// Structural and probabilistic checks.
    pub fn validate(&self) -> Result<()> {
        let (m, n, na) = (self.num_agents(), self.num_states, self.num_actions);
        if m == 0 || n == 0 || na == 0 {
            return Err(Error::InvalidArgument("empty simplified game".into()));
        }
        let sized = self.final_rewards.len() == m
            && self.transitions.len() == m
            && self.initial_states.len() == m
            && self.rewards.iter().all(|r| r.rows() == n && r.cols() == na)
            && self.final_rewards.iter().all(|f| f.len() == n)
            && self.transitions.iter().all(|t| t.rows() == n * na && t.cols() == n);
        if !sized {
            return Err(Error::Dimension("simplified game tables".into()));
        }
        if let Some(&x) = self.initial_states.iter().find(|&&x| x >= n) {
            return Err(Error::OutOfRange(format!("initial state {x} of {n}")));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            for (r, row) in t.iter_rows().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "kernel of agent {i}, state {}, action {}: row sums to {sum}",
                        r / na,
                        r % na
                    )));
                }
            }
        }
        if !self.rewards.iter().all(Table::all_finite) || !self.final_rewards.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("simplified game rewards".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta = {}", self.beta)));
        }
        match &self.psi {
            InteractionFunctional::LinearPenalty { weights } => {
                if weights.len() != m || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "penalty weights must be one finite, nonnegative value per agent".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn kernel_row(&self, agent: usize, x: usize, a: usize) -> &[f64] {
        self.transitions[agent].row(x * self.num_actions + a)
    }

    pub fn delta(&self, agent: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.num_states];
        d[self.initial_states[agent]] = 1.0;
        d
    }

    pub fn with_psi(&self, psi: InteractionFunctional) -> SimplifiedGame {
        SimplifiedGame { psi, ..self.clone() }
    }
}

/// `B_i(O_{-i}^τ, Q̃_i^{τ+1})` with the successor soft value `v_next`.
pub fn apply_b(sgame: &SimplifiedGame, agent: usize, penalty: &[f64], v_next: &[f64]) -> Result<Table> {
    let n = sgame.num_states;
    if penalty.len() != n || v_next.len() != n {
        return Err(Error::Dimension(format!("vectors over {n} states expected")));
    }
    let mut out = sgame.rewards[agent].clone();
    for x in 0..n {
        for a in 0..sgame.num_actions {
            let cont: f64 = boltzmann::dot(sgame.kernel_row(agent, x, a), v_next);
            let q = out.get(x, a) + penalty[x] + cont;
            out.set(x, a, q);
        }
    }
    Ok(out)
}

/// `G_i(O_i^τ, Q̃_i^τ)`.
pub fn apply_g(sgame: &SimplifiedGame, agent: usize, occ: &[f64], q: &Table) -> Result<Vec<f64>> {
    let n = sgame.num_states;
    if occ.len() != n || q.rows() != n || q.cols() != sgame.num_actions {
        return Err(Error::Dimension(format!("occupancy and Q over {n} states expected")));
    }
    let policy = boltzmann::boltzmann_table(q, sgame.beta);
    let mut next = vec![0.0; n];
    for (x, &o) in occ.iter().enumerate() {
        if o == 0.0 {
            continue;
        }
        for (a, &pa) in policy.row(x).iter().enumerate() {
            let w = o * pa;
            for (nx, &p) in next.iter_mut().zip(sgame.kernel_row(agent, x, a)) {
                *nx += w * p;
            }
        }
    }
    Ok(next)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbConfig {
    /// Number of forward-backward alternations `K`.
    pub iterations: usize,
    pub init: Init,
    pub seed: u64,
    /// Last-delta threshold below which the trace reports convergence.
    pub tolerance: f64,
    /// Weight of the fresh backward pass, `Q̃ ← αB + (1−α)Q̃`; 1 is the plain
    /// alternation.
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FbConfig {
    fn default() -> Self {
        FbConfig {
            iterations: 50,
            init: Init::Zeros,
            seed: 0,
            tolerance: 1e-8,
            alpha: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbSolution {
    /// `q[i][τ]` for `τ ∈ [0, T)`.
    pub q: Vec<Vec<Table>>,
    /// `occupancy[i][τ]` for `τ ∈ [0, T]`, from the last forward pass.
    pub occupancy: Vec<Vec<Vec<f64>>>,
    /// Per outer iteration, `max |Σ_x O_i^τ(x) − 1|` over agents and times.
    pub mass_error: Vec<f64>,
    /// Residuals are `max ‖B(Q̃) − Q̃‖_∞` per outer iteration, the plain
    /// change of `Q̃` when `α = 1`.
    pub trace: SolveTrace,
}

impl FbSolution {
    pub fn policy(&self, sgame: &SimplifiedGame, agent: usize, tau: usize) -> Table {
        boltzmann::boltzmann_table(&self.q[agent][tau], sgame.beta)
    }

    pub fn occupancy_measure(&self, agent: usize, tau: usize) -> OccupancyMeasure {
        OccupancyMeasure {
            agent,
            time_step: tau,
            dist: self.occupancy[agent][tau].clone(),
        }
    }
}

fn forward(sgame: &SimplifiedGame, q: &[Vec<Table>]) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..sgame.num_agents())
        .map(|i| {
            let mut occ = Vec::with_capacity(sgame.horizon + 1);
            occ.push(sgame.delta(i));
            for tau in 0..sgame.horizon {
                let next = apply_g(sgame, i, &occ[tau], &q[i][tau])?;
                occ.push(next);
            }
            Ok(occ)
        })
        .collect()
}

fn backward(sgame: &SimplifiedGame, occ: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<Table>>> {
    let m = sgame.num_agents();
    let t = sgame.horizon;
    let mut q = vec![Vec::with_capacity(t); m];
    for (i, qi) in q.iter_mut().enumerate() {
        let mut v_next = sgame.final_rewards[i].clone();
        let mut stages = vec![Table::zeros(0, 0); t];
        for tau in (0..t).rev() {
            let at_tau: Vec<&[f64]> = occ.iter().map(|o| o[tau].as_slice()).collect();
            let penalty = apply_psi(&sgame.psi, i, &at_tau)?;
            let table = apply_b(sgame, i, &penalty, &v_next)?;
            v_next = boltzmann::self_soft_values(&table, sgame.beta);
            stages[tau] = table;
        }
        *qi = stages;
    }
    Ok(q)
}

/// Runs `config.iterations` forward-backward alternations.
pub fn solve_mge_fb(sgame: &SimplifiedGame, config: &FbConfig) -> Result<FbSolution> {
    sgame.validate()?;
    config.init.check()?;
    let (m, t) = (sgame.num_agents(), sgame.horizon);
    let tables = config
        .init
        .tables(config.seed, m * t, sgame.num_states, sgame.num_actions);
    let q: Vec<Vec<Table>> = (0..m).map(|i| tables[i * t..(i + 1) * t].to_vec()).collect();
    solve_mge_fb_from(sgame, q, config)
}

/// Like [`solve_mge_fb`] from explicit initial tables `q[i][τ]`.
pub fn solve_mge_fb_from(sgame: &SimplifiedGame, mut q: Vec<Vec<Table>>, config: &FbConfig) -> Result<FbSolution> {
    sgame.validate()?;
    let (n, na) = (sgame.num_states, sgame.num_actions);
    if q.len() != sgame.num_agents()
        || q.iter()
            .any(|qi| qi.len() != sgame.horizon || qi.iter().any(|t| t.rows() != n || t.cols() != na))
    {
        return Err(Error::Dimension("initial Q tables".into()));
    }
    if !(config.alpha > 0.0 && config.alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {} must be in (0, 1]",
            config.alpha
        )));
    }
    let started = Instant::now();
    let mut trace = SolveTrace::default();
    let mut mass_error = Vec::with_capacity(config.iterations);
    let mut occ = forward(sgame, &q)?;
    for _ in 0..config.iterations {
        let iter_start = Instant::now();
        occ = forward(sgame, &q)?;
        mass_error.push(
            occ.iter()
                .flatten()
                .map(|o| (o.iter().sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max),
        );
        let next = backward(sgame, &occ)?;
        let delta = next
            .iter()
            .flatten()
            .zip(q.iter().flatten())
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max);
        q = if config.alpha == 1.0 {
            next
        } else {
            next.iter()
                .zip(&q)
                .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a.mix(b, config.alpha)).collect())
                .collect()
        };
        trace.record(delta, iter_start);
    }
    let converged = trace.last_residual().is_some_and(|r| r < config.tolerance);
    trace.finish(converged, started);
    Ok(FbSolution {
        q,
        occupancy: occ,
        mass_error,
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Check {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub xi: f64,
    pub l: f64,
    pub omega: f64,
    pub phi: f64,
}

/// `2LT ≤ ξ exp(−β(T+1)ξ)` with `ξ = (T+1)(ω+φ)`.
pub fn check_theorem3_condition(sgame: &SimplifiedGame) -> Result<Theorem3Check> {
    let omega = sgame
        .rewards
        .iter()
        .map(Table::sup_norm)
        .chain(sgame.final_rewards.iter().map(|f| crate::table::sup_norm(f)))
        .fold(0.0, f64::max);
    Ok(theorem3_condition(
        omega,
        sgame.psi.sup_bound(),
        sgame.psi.lipschitz(),
        sgame.horizon,
        sgame.beta,
    ))
}

pub fn theorem3_condition(omega: f64, phi: f64, l: f64, horizon: usize, beta: f64) -> Theorem3Check {
    let t1 = (horizon + 1) as f64;
    let xi = t1 * (omega + phi);
    let lhs = 2.0 * l * horizon as f64;
    let rhs = xi * (-beta * t1 * xi).exp();
    Theorem3Check {
        satisfied: lhs <= rhs,
        lhs,
        rhs,
        xi,
        l,
        omega,
        phi,
    }
}

/// Per agent, the states visited when every agent plays its most likely
/// action and moves to its most likely successor; ties go to the lowest
/// index.
pub fn argmax_trajectories(sgame: &SimplifiedGame, q: &[Vec<Table>]) -> Vec<Vec<usize>> {
    (0..sgame.num_agents())
        .map(|i| {
            let mut x = sgame.initial_states[i];
            let mut path = vec![x];
            for table in q[i].iter().take(sgame.horizon) {
                let mut p = vec![0.0; sgame.num_actions];
                boltzmann::boltzmann_row(table.row(x), sgame.beta, &mut p);
                let a = argmax_with_tolerance(&p, 1e-9);
                x = argmax_with_tolerance(sgame.kernel_row(i, x, a), 1e-12);
                path.push(x);
            }
            path
        })
        .collect()
}

/// Writes `agent,tau,state,prob` rows.
pub fn write_occupancy_csv<W: Write>(occupancy: &[Vec<Vec<f64>>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "tau", "state", "prob"])?;
    for (i, per_time) in occupancy.iter().enumerate() {
        for (tau, dist) in per_time.iter().enumerate() {
            for (x, p) in dist.iter().enumerate() {
                w.write_record([i.to_string(), tau.to_string(), x.to_string(), fmt_f64(*p)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `agent,tau,state` rows.
pub fn write_trajectory_csv<W: Write>(paths: &[Vec<usize>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "tau", "state"])?;
    for (i, path) in paths.iter().enumerate() {
        for (tau, x) in path.iter().enumerate() {
            w.write_record([i.to_string(), tau.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two agents on a 4-cell line, actions {stay, left, right}.
    fn line(mu: f64, horizon: usize) -> SimplifiedGame {
        let (n, na) = (4, 3);
        let mut t = Table::zeros(n * na, n);
        for x in 0..n {
            let succ = [x, x.saturating_sub(1), (x + 1).min(n - 1)];
            for (a, &s) in succ.iter().enumerate() {
                t.set(x * na + a, s, 1.0);
            }
        }
        let goal = |g: usize| {
            let mut r = Table::zeros(n, na);
            for a in 0..na {
                r.set(g, a, 0.01);
            }
            r
        };
        SimplifiedGame {
            num_states: n,
            num_actions: na,
            rewards: vec![goal(3), goal(0)],
            final_rewards: vec![vec![0.0, 0.0, 0.0, 0.01], vec![0.01, 0.0, 0.0, 0.0]],
            transitions: vec![t.clone(), t],
            horizon,
            beta: 1.0,
            psi: InteractionFunctional::LinearPenalty { weights: vec![mu, mu] },
            initial_states: vec![0, 3],
            agent_names: vec!["a".into(), "b".into()],
            state_names: vec![],
        }
    }

    #[test]
    fn psi_cases() {
        let psi = InteractionFunctional::LinearPenalty {
            weights: vec![5.0, 1.0, 3.0],
        };
        let zero = [0.0; 4];
        let u = [0.25; 4];
        let p = apply_psi(&psi, 0, &[&[1.0, 0.0, 0.0, 0.0], &u, &u]).unwrap();
        assert_eq!(p, vec![-1.0; 4]);
        let p = apply_psi(&psi, 1, &[&zero, &u, &zero]).unwrap();
        assert_eq!(p, vec![0.0; 4]);
        let single = InteractionFunctional::LinearPenalty {
            weights: vec![1.0, 2.0],
        };
        let p = apply_psi(&single, 0, &[&zero, &[0.0, 1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![0.0, -2.0, 0.0, 0.0]);
        assert!(apply_psi(&single, 0, &[&zero, &[0.0; 3]]).is_err());
    }

    #[test]
    fn forward_operator_cases() {
        let mut g = line(0.0, 1);
        // identity kernel for every action
        let mut id = Table::zeros(12, 4);
        for x in 0..4 {
            for a in 0..3 {
                id.set(x * 3 + a, x, 1.0);
            }
        }
        g.transitions[0] = id;
        let occ = [0.1, 0.2, 0.3, 0.4];
        let q = Table::from_rows(&vec![vec![0.3, -1.0, 2.0]; 4]).unwrap();
        for (o, e) in apply_g(&g, 0, &occ, &q).unwrap().iter().zip(occ) {
            assert!((o - e).abs() < 1e-15);
        }

        // swap chain on two states
        let swap = Table::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let g2 = SimplifiedGame {
            num_states: 2,
            num_actions: 2,
            rewards: vec![Table::zeros(2, 2)],
            final_rewards: vec![vec![0.0; 2]],
            transitions: vec![swap],
            horizon: 1,
            beta: 1.0,
            psi: InteractionFunctional::LinearPenalty { weights: vec![0.0] },
            initial_states: vec![0],
            agent_names: vec![],
            state_names: vec![],
        };
        let out = apply_g(&g2, 0, &[0.7, 0.3], &Table::zeros(2, 2)).unwrap();
        assert!((out[0] - 0.3).abs() < 1e-15 && (out[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn backward_operator_zero_inputs_give_rewards() {
        let g = line(0.0, 2);
        let q = apply_b(&g, 0, &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(q, g.rewards[0]);
    }

    #[test]
    fn zero_iterations_return_initializer() {
        let g = line(0.5, 3);
        let cfg = FbConfig {
            iterations: 0,
            init: Init::Random { scale: 1.0 },
            seed: 9,
            ..Default::default()
        };
        let sol = solve_mge_fb(&g, &cfg).unwrap();
        let init = cfg.init.tables(9, 6, 4, 3);
        assert_eq!(sol.q[1][2], init[5]);
        assert!(sol.trace.residuals.is_empty());
    }

    #[test]
    fn uncoupled_agents_settle_after_one_iteration() {
        let g = line(0.0, 3);
        let sol = solve_mge_fb(
            &g,
            &FbConfig {
                iterations: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.trace.residuals[1], 0.0);
        assert_eq!(sol.trace.residuals[2], 0.0);
    }

    #[test]
    fn theorem3_arithmetic() {
        let c = theorem3_condition(0.01, 0.01, 0.01, 2, 1.0);
        assert!((c.xi - 0.06).abs() < 1e-15);
        assert!((c.rhs - 0.06 * (-0.18f64).exp()).abs() < 1e-15);
        assert!((c.lhs - 0.04).abs() < 1e-15);
        assert!(c.satisfied);
        assert!(theorem3_condition(1.0, 1.0, 1.0, 0, 1.0).satisfied);
        assert!(check_theorem3_condition(&line(0.0, 4)).unwrap().satisfied);
    }

    #[test]
    fn coupled_line_contracts_and_forgets_init() {
        let g = line(0.002, 3);
        assert!(check_theorem3_condition(&g).unwrap().satisfied);
        let a = solve_mge_fb(&g, &FbConfig::default()).unwrap();
        let b = solve_mge_fb(
            &g,
            &FbConfig {
                init: Init::Random { scale: 0.5 },
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for (qa, qb) in a.q.iter().flatten().zip(b.q.iter().flatten()) {
            assert!(qa.sup_distance(qb) < 1e-6);
        }
        assert!(a.mass_error.iter().all(|&e| e < 1e-10));
    }

    proptest! {
        #[test]
        fn psi_is_lipschitz(
            o in proptest::collection::vec(0.0f64..1.0, 12),
            p in proptest::collection::vec(0.0f64..1.0, 12),
            mu in proptest::collection::vec(0.0f64..3.0, 3),
        ) {
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
            let o: Vec<Vec<f64>> = o.chunks(4).map(norm).collect();
            let p: Vec<Vec<f64>> = p.chunks(4).map(norm).collect();
            let psi = InteractionFunctional::LinearPenalty { weights: mu };
            for i in 0..3 {
                let a = apply_psi(&psi, i, &[&o[0], &o[1], &o[2]]).unwrap();
                let b = apply_psi(&psi, i, &[&p[0], &p[1], &p[2]]).unwrap();
                let d = crate::table::sup_distance(&a, &b);
                let max_l1 = (0..3).filter(|&j| j != i)
                    .map(|j| crate::table::l1_distance(&o[j], &p[j]))
                    .fold(0.0, f64::max);
                prop_assert!(d <= psi.lipschitz() * max_l1 + 1e-12);
            }
        }
    }
}
