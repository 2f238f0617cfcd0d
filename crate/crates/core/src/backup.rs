//! Shared expected backup used by both Bellman-type operators.

use crate::game::MarkovGame;
use crate::table::Table;

/// `R_i(x,a_i) + scale · Σ_{a_{-i}} Π_{j≠i} π_j(a_j|x) Σ_{x'} P(x'|x,a⃗) v(x')`.
///
/// `policies[j]` is read for every `j ≠ agent` only.
pub(crate) fn expected_backup(
    game: &MarkovGame,
    agent: usize,
    reward: &Table,
    policies: &[&Table],
    v: &[f64],
    scale: f64,
) -> Table {
    let n = game.num_states();
    let na = game.num_actions();
    let m = game.num_agents();
    let ja_count = game.num_joint_actions();
    let kernel = game.transition();
    let mut out = reward.clone();
    if scale == 0.0 {
        return out;
    }
    let mut components = vec![0usize; m];
    let mut cont = vec![0.0; na];
    for x in 0..n {
        cont.iter_mut().for_each(|c| *c = 0.0);
        components.iter_mut().for_each(|c| *c = 0);
        for ja in 0..ja_count {
            let mut w = 1.0;
            for (j, &aj) in components.iter().enumerate() {
                if j != agent {
                    w *= policies[j].get(x, aj);
                }
            }
            if w != 0.0 {
                cont[components[agent]] += w * kernel.row(x, ja).expect(v);
            }
            // odometer with agent 0 outermost
            for k in (0..m).rev() {
                components[k] += 1;
                if components[k] < na {
                    break;
                }
                components[k] = 0;
            }
        }
        for (o, c) in out.row_mut(x).iter_mut().zip(&cont) {
            *o += scale * c;
        }
    }
    out
}
