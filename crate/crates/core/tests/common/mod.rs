//! Brute-force oracles written against the public game accessors only:
//! every expectation enumerates opponents' action tuples explicitly and
//! reads dense transition rows.
#![allow(dead_code)]

use mge_core::envs::{generate_random_game, RandomGameSpec};
use mge_core::game::{HorizonMode, MarkovGame};
use mge_core::table::Table;

pub fn random_game(agents: usize, states: usize, actions: usize, mode: HorizonMode, seed: u64) -> MarkovGame {
    generate_random_game(&RandomGameSpec {
        agents,
        states_per_agent: states,
        actions,
        mode,
        reward_scale: 1.0,
        seed,
    })
    .unwrap()
}

/// All tuples in `[0, n)^k`, first coordinate slowest.
pub fn tuples(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

/// `exp(βq) / Σ exp(βq)` without any stabilisation.
pub fn naive_boltzmann(q: &[f64], beta: f64) -> Vec<f64> {
    let e: Vec<f64> = q.iter().map(|v| (beta * v).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn naive_policy(q: &Table, beta: f64) -> Table {
    let rows: Vec<Vec<f64>> = q.iter_rows().map(|r| naive_boltzmann(r, beta)).collect();
    Table::from_rows(&rows).unwrap()
}

pub fn soft_values(q: &Table, beta: f64) -> Vec<f64> {
    q.iter_rows()
        .map(|r| naive_boltzmann(r, beta).iter().zip(r).map(|(p, v)| p * v).sum())
        .collect()
}

/// `R_i(x,a_i) + scale · Σ_{a_{-i}} Π_{j≠i} π_j(a_j|x) Σ_y P(y|x,a) v(y)`.
pub fn oracle_backup(
    game: &MarkovGame,
    agent: usize,
    reward: &Table,
    policies: &[Table],
    v: &[f64],
    scale: f64,
) -> Table {
    let (m, na) = (game.num_agents(), game.num_actions());
    let mut out = reward.clone();
    for x in 0..game.num_states() {
        let state = game.states().state(x).unwrap();
        for own in 0..na {
            let mut acc = 0.0;
            for others in tuples(m - 1, na) {
                let mut joint = others.clone();
                joint.insert(agent, own);
                let mut w = 1.0;
                for j in (0..m).filter(|&j| j != agent) {
                    w *= policies[j].get(x, joint[j]);
                }
                let row = game.joint_transition_row(&state, &joint).unwrap();
                acc += w * row.iter().zip(v).map(|(p, vy)| p * vy).sum::<f64>();
            }
            out.set(x, own, reward.get(x, own) + scale * acc);
        }
    }
    out
}

/// Plain Jacobi iteration of the discounted operator until the sup change
/// is below `tol`.
pub fn oracle_mge_i(game: &MarkovGame, tol: f64) -> Vec<Table> {
    let gamma = game.discount().unwrap();
    let m = game.num_agents();
    let mut q = vec![Table::zeros(game.num_states(), game.num_actions()); m];
    for _ in 0..1_000_000 {
        let pis: Vec<Table> = q.iter().map(|t| naive_policy(t, game.beta())).collect();
        let next: Vec<Table> = (0..m)
            .map(|i| oracle_backup(game, i, game.reward(i), &pis, &soft_values(&q[i], game.beta()), gamma))
            .collect();
        let d = next.iter().zip(&q).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max);
        q = next;
        if d < tol {
            return q;
        }
    }
    panic!("oracle did not converge");
}

/// Backward stages, each solved by plain Jacobi iteration to `tol`;
/// returns `(q[τ][i], v[τ][i])` with `v[T] = R_F`.
pub fn oracle_mge_f(game: &MarkovGame, tol: f64) -> (Vec<Vec<Table>>, Vec<Vec<Vec<f64>>>) {
    let t = game.horizon().unwrap();
    let m = game.num_agents();
    let beta = game.beta();
    let mut v = vec![Vec::new(); t + 1];
    v[t] = (0..m).map(|i| game.final_reward(i)).collect();
    let mut qs = vec![Vec::new(); t];
    for tau in (0..t).rev() {
        let mut q = vec![Table::zeros(game.num_states(), game.num_actions()); m];
        let mut done = false;
        for _ in 0..1_000_000 {
            let pis: Vec<Table> = q.iter().map(|t| naive_policy(t, beta)).collect();
            let next: Vec<Table> = (0..m)
                .map(|i| oracle_backup(game, i, game.reward(i), &pis, &v[tau + 1][i], 1.0))
                .collect();
            let d = next.iter().zip(&q).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max);
            q = next;
            if d < tol {
                done = true;
                break;
            }
        }
        assert!(done, "oracle stage {tau} did not converge");
        v[tau] = q.iter().map(|qi| soft_values(qi, beta)).collect();
        qs[tau] = q;
    }
    (qs, v)
}

/// Least-squares slope of `ln r` against the index, as a per-step ratio.
pub fn fitted_ratio(residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(k, r)| (k as f64, r.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}
