//! Two-player 3x3 grid games, cells numbered row-major:
//!
//! ```text
//! 0 1 2
//! 3 4 5
//! 6 7 8
//! ```
//!
//! Both games start with A on 6 and B on 8. Each player's state is its cell
//! or [`DONE`], entered on the step after it stands on its goal. Players
//! collide when they share a cell; swapping cells is not a collision.
//!
//! * Game I: A's goal is 2, B's goal is 0. Standing on the own goal pays
//!   +30, a collision costs 1. Deterministic.
//! * Game II: both aim for the shared goal 1, worth +2. Moving up out of
//!   cells 6 and 8 crosses a barrier and succeeds with probability 0.5,
//!   otherwise the player stays. Collisions cost 1 except on the goal.

use super::{grid_move, names, product_game, EnvParams, EventDetector, ProductSpec, MOVE_NAMES, UP};
use crate::error::Result;
use crate::game::MarkovGame;

const SIDE: usize = 3;
const CELLS: usize = SIDE * SIDE;
pub(crate) const DONE: usize = CELLS;
pub(crate) const INITIAL: [usize; 2] = [6, 8];
const GOALS_1: [usize; 2] = [2, 0];
const GOAL_2: usize = 1;
const BARRIERS: [usize; 2] = [6, 8];

fn collided(x: &[usize]) -> bool {
    x[0] == x[1] && x[0] < DONE
}

fn moves(cell: usize, a: usize) -> usize {
    grid_move(cell, a, SIDE, SIDE).unwrap_or(cell)
}

fn placement(goals: [usize; 2]) -> impl Fn(&[usize]) -> bool {
    move |x: &[usize]| x[0] != x[1] && x.iter().all(|&c| c < DONE && !goals.contains(&c))
}

/// Default horizon 8.
pub fn build_grid_game_1(params: &EnvParams) -> Result<MarkovGame> {
    let step = |i: usize, x: &[usize], a: usize| {
        let s = x[i];
        let next = if s == DONE || s == GOALS_1[i] {
            DONE
        } else {
            moves(s, a)
        };
        vec![(next, 1.0)]
    };
    let reward =
        |i: usize, x: &[usize]| (if x[i] == GOALS_1[i] { 30.0 } else { 0.0 }) - if collided(x) { 1.0 } else { 0.0 };
    product_game(
        ProductSpec {
            state_sizes: vec![CELLS + 1; 2],
            num_actions: MOVE_NAMES.len(),
            step: &step,
            reward: &reward,
            placement: &placement(GOALS_1),
            agent_names: names(&["A", "B"]),
            action_names: names(&MOVE_NAMES),
            default_horizon: 8,
        },
        params,
    )
}

/// Default horizon 8.
pub fn build_grid_game_2(params: &EnvParams) -> Result<MarkovGame> {
    let step = |i: usize, x: &[usize], a: usize| {
        let s = x[i];
        if s == DONE || s == GOAL_2 {
            vec![(DONE, 1.0)]
        } else if a == UP && BARRIERS.contains(&s) {
            vec![(moves(s, a), 0.5), (s, 0.5)]
        } else {
            vec![(moves(s, a), 1.0)]
        }
    };
    let reward = |i: usize, x: &[usize]| {
        (if x[i] == GOAL_2 { 2.0 } else { 0.0 }) - if collided(x) && x[0] != GOAL_2 { 1.0 } else { 0.0 }
    };
    product_game(
        ProductSpec {
            state_sizes: vec![CELLS + 1; 2],
            num_actions: MOVE_NAMES.len(),
            step: &step,
            reward: &reward,
            placement: &placement([GOAL_2, GOAL_2]),
            agent_names: names(&["A", "B"]),
            action_names: names(&MOVE_NAMES),
            default_horizon: 8,
        },
        params,
    )
}

pub(crate) fn events_1() -> Vec<EventDetector> {
    vec![
        EventDetector::new("goal_A", |x| x[0] == GOALS_1[0]),
        EventDetector::new("goal_B", |x| x[1] == GOALS_1[1]),
        EventDetector::new("collision", collided),
    ]
}

pub(crate) fn events_2() -> Vec<EventDetector> {
    vec![
        EventDetector::new("goal_A", |x| x[0] == GOAL_2),
        EventDetector::new("goal_B", |x| x[1] == GOAL_2),
        EventDetector::new("collision", |x| collided(x) && x[0] != GOAL_2),
    ]
}
