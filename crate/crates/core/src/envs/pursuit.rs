//! Pursuit on nine nodes laid out as a 3x3 grid, numbered row-major:
//!
//! ```text
//! 0 1 2
//! 3 4 5
//! 6 7 8
//! ```
//!
//! Hunters move along grid edges (stay, up, down, left, right). In the
//! two-player game the prey moves along diagonals instead: its action `k`
//! is the hunter move `k` rotated 45° counter-clockwise (up-left, down-right,
//! down-left, up-right). Moves leaving the grid keep the agent in place, so
//! every node has a self-loop. Dynamics are deterministic.

use super::{grid_move, names, product_game, EnvParams, EventDetector, ProductSpec, DOWN, LEFT, MOVE_NAMES, RIGHT, UP};
use crate::error::{Error, Result};
use crate::game::MarkovGame;

pub const PURSUIT_ACTIONS: usize = 5;
pub(crate) const DEFAULT_INITIAL_2P: [usize; 2] = [0, 8];
pub(crate) const DEFAULT_INITIAL_3P: [usize; 3] = [1, 5, 2];

const SIDE: usize = 3;
const NODES: usize = SIDE * SIDE;
const HUNT_REWARD: f64 = 0.4;

fn hunter_move(node: usize, action: usize) -> usize {
    grid_move(node, action, SIDE, SIDE).unwrap_or(node)
}

fn prey_move(node: usize, action: usize) -> usize {
    let (r, c) = ((node / SIDE) as isize, (node % SIDE) as isize);
    let (dr, dc) = match action {
        UP => (-1, -1),
        DOWN => (1, 1),
        LEFT => (1, -1),
        RIGHT => (-1, 1),
        _ => (0, 0),
    };
    let (nr, nc) = (r + dr, c + dc);
    if (0..SIDE as isize).contains(&nr) && (0..SIDE as isize).contains(&nc) {
        (nr * SIDE as isize + nc) as usize
    } else {
        node
    }
}

fn distinct(x: &[usize]) -> bool {
    x.iter().enumerate().all(|(i, a)| x[i + 1..].iter().all(|b| a != b))
}

fn check_nodes(params: &EnvParams) -> Result<()> {
    if let Some(init) = &params.initial {
        if let Some(&n) = init.iter().find(|&&n| n >= NODES) {
            return Err(Error::OutOfRange(format!("pursuit node {n} (nodes are 0..=8)")));
        }
    }
    Ok(())
}

/// One hunter and one prey; the hunter earns 0.4 and the prey loses 0.4 in
/// every state where they share a node. Default horizon 22.
pub fn build_pursuit_2p(params: &EnvParams) -> Result<MarkovGame> {
    check_nodes(params)?;
    let step = |i: usize, x: &[usize], a: usize| {
        let next = if i == 0 {
            hunter_move(x[0], a)
        } else {
            prey_move(x[1], a)
        };
        vec![(next, 1.0)]
    };
    let reward = |i: usize, x: &[usize]| match (x[0] == x[1], i) {
        (true, 0) => HUNT_REWARD,
        (true, _) => -HUNT_REWARD,
        _ => 0.0,
    };
    product_game(
        ProductSpec {
            state_sizes: vec![NODES, NODES],
            num_actions: PURSUIT_ACTIONS,
            step: &step,
            reward: &reward,
            placement: &distinct,
            agent_names: names(&["hunter", "prey"]),
            action_names: names(&MOVE_NAMES),
            default_horizon: 22,
        },
        params,
    )
}

/// Reward of hunter `me` given the other hunter's and the prey's nodes.
fn hunter_reward(me: usize, other: usize, prey: usize) -> f64 {
    match (me == other, me == prey) {
        (false, false) => 0.0,
        (true, false) => -15.0 / 4.0,
        (true, true) => -10.0 / 4.0,
        (false, true) => 5.0 / 4.0,
    }
}

/// Two hunters and a prey, all moving along grid edges. Default horizon 3
/// and initial placement `{h1: 1, h2: 5, p: 2}`.
pub fn build_pursuit_3p(params: &EnvParams) -> Result<MarkovGame> {
    check_nodes(params)?;
    let params = EnvParams {
        initial: Some(params.initial.clone().unwrap_or(DEFAULT_INITIAL_3P.to_vec())),
        ..params.clone()
    };
    let step = |i: usize, x: &[usize], a: usize| vec![(hunter_move(x[i], a), 1.0)];
    let reward = |i: usize, x: &[usize]| match i {
        0 => hunter_reward(x[0], x[1], x[2]),
        1 => hunter_reward(x[1], x[0], x[2]),
        _ if x[2] == x[0] || x[2] == x[1] => -1.0 / 8.0,
        _ => 0.0,
    };
    product_game(
        ProductSpec {
            state_sizes: vec![NODES; 3],
            num_actions: PURSUIT_ACTIONS,
            step: &step,
            reward: &reward,
            placement: &distinct,
            agent_names: names(&["hunter1", "hunter2", "prey"]),
            action_names: names(&MOVE_NAMES),
            default_horizon: 3,
        },
        &params,
    )
}

pub(crate) fn events_2p() -> Vec<EventDetector> {
    vec![EventDetector::new("hunt", |x| x[0] == x[1])]
}

pub(crate) fn events_3p() -> Vec<EventDetector> {
    vec![
        EventDetector::new("catch", |x| x[2] == x[0] || x[2] == x[1]),
        EventDetector::new("hunter_collision", |x| x[0] == x[1]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_player_rewards_are_antisymmetric() {
        let g = build_pursuit_2p(&EnvParams::default()).unwrap();
        assert_eq!(g.horizon(), Some(22));
        for x in 0..g.num_states() {
            let c = g.states().unflatten(x);
            let (h, p) = (g.reward(0).get(x, 0), g.reward(1).get(x, 3));
            assert_eq!(h, -p);
            assert_eq!(h, if c[0] == c[1] { 0.4 } else { 0.0 });
        }
    }

    #[test]
    fn every_node_has_a_self_loop() {
        for node in 0..NODES {
            assert_eq!(hunter_move(node, 0), node);
            assert_eq!(prey_move(node, 0), node);
        }
        assert_eq!(prey_move(4, UP), 0);
        assert_eq!(prey_move(4, RIGHT), 2);
        assert_eq!(prey_move(4, LEFT), 6);
        assert_eq!(prey_move(4, DOWN), 8);
        assert_eq!(prey_move(1, UP), 1);
        assert_eq!(hunter_move(4, LEFT), 3);
    }

    #[test]
    fn three_player_case_table() {
        let g = build_pursuit_3p(&EnvParams::default()).unwrap();
        let r = |i: usize, c: [usize; 3]| g.reward(i).get(g.states().flatten(&c).unwrap(), 0);
        assert_eq!(r(0, [4, 4, 2]), -15.0 / 4.0);
        assert_eq!(r(0, [4, 4, 4]), -10.0 / 4.0);
        assert_eq!(r(0, [4, 3, 4]), 5.0 / 4.0);
        assert_eq!(r(0, [0, 3, 4]), 0.0);
        assert_eq!(r(1, [4, 3, 3]), 5.0 / 4.0);
        assert_eq!(r(2, [0, 3, 4]), 0.0);
        assert_eq!(r(2, [0, 4, 4]), -1.0 / 8.0);
        assert_eq!(g.max_reward_norm(), 15.0 / 4.0);
        let start = g.states().flatten(&[1, 5, 2]).unwrap();
        assert_eq!(g.initial_dist()[start], 1.0);
    }

    #[test]
    fn invalid_node_rejected() {
        let p = EnvParams {
            initial: Some(vec![0, 9, 1]),
            ..Default::default()
        };
        assert!(build_pursuit_3p(&p).is_err());
    }
}
