//! A fox chases a rabbit on a 4x4 grid with one hole cell.
//!
//! ```text
//!  0  1  2  3
//!  4 [5] 6  7      [5] is the hole
//!  8  9 10 11
//! 12 13 14 15
//! ```
//!
//! The rabbit's state is `flag * 16 + cell` where `flag` records that the
//! hole prize was already collected, plus the absorbing state
//! [`RABBIT_CAUGHT`]. Being in the hole with `flag = 0` pays the rabbit 0.3
//! and sets the flag. Sharing a cell with the fox pays the fox 2, costs the
//! rabbit 2 and sends the rabbit to the caught state. Both animals may
//! enter the hole.

use super::{grid_move, names, product_game, EnvParams, EventDetector, ProductSpec, MOVE_NAMES};
use crate::error::Result;
use crate::game::MarkovGame;

const SIDE: usize = 4;
const CELLS: usize = SIDE * SIDE;
pub const RABBIT_HOLE: usize = 5;
pub const RABBIT_CAUGHT: usize = 2 * CELLS;
const PRIZE: f64 = 0.3;
const CATCH: f64 = 2.0;

/// Rabbit at cell 12, fox at cell 3.
pub(crate) const DEFAULT_INITIAL: [usize; 2] = [12, 3];

fn rabbit_cell(s: usize) -> Option<usize> {
    (s < RABBIT_CAUGHT).then_some(s % CELLS)
}

fn caught(x: &[usize]) -> bool {
    rabbit_cell(x[0]) == Some(x[1])
}

fn prize(x: &[usize]) -> bool {
    x[0] == RABBIT_HOLE
}

/// Default horizon 12.
pub fn build_rabbit_hole(params: &EnvParams) -> Result<MarkovGame> {
    let step = |i: usize, x: &[usize], a: usize| {
        let next = if i == 1 {
            grid_move(x[1], a, SIDE, SIDE).unwrap_or(x[1])
        } else if x[0] == RABBIT_CAUGHT || caught(x) {
            RABBIT_CAUGHT
        } else {
            let cell = x[0] % CELLS;
            let flag = x[0] / CELLS == 1 || cell == RABBIT_HOLE;
            grid_move(cell, a, SIDE, SIDE).unwrap_or(cell) + if flag { CELLS } else { 0 }
        };
        vec![(next, 1.0)]
    };
    let reward = |i: usize, x: &[usize]| {
        let c = if caught(x) { CATCH } else { 0.0 };
        if i == 1 {
            c
        } else {
            -c + if prize(x) { PRIZE } else { 0.0 }
        }
    };
    let placement = |x: &[usize]| x[0] < CELLS && x[0] != x[1];
    product_game(
        ProductSpec {
            state_sizes: vec![RABBIT_CAUGHT + 1, CELLS],
            num_actions: MOVE_NAMES.len(),
            step: &step,
            reward: &reward,
            placement: &placement,
            agent_names: names(&["rabbit", "fox"]),
            action_names: names(&MOVE_NAMES),
            default_horizon: 12,
        },
        params,
    )
}

pub(crate) fn events() -> Vec<EventDetector> {
    vec![EventDetector::new("catch", caught), EventDetector::new("prize", prize)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(g: &MarkovGame, c: [usize; 2]) -> (f64, f64) {
        let x = g.states().flatten(&c).unwrap();
        (g.reward(0).get(x, 0), g.reward(1).get(x, 0))
    }

    #[test]
    fn reward_cases() {
        let g = build_rabbit_hole(&EnvParams::default()).unwrap();
        assert_eq!(g.horizon(), Some(12));
        assert_eq!(r(&g, [7, 7]), (-2.0, 2.0));
        assert_eq!(r(&g, [7 + 16, 7]), (-2.0, 2.0));
        assert_eq!(r(&g, [RABBIT_HOLE, 0]), (0.3, 0.0));
        assert_eq!(r(&g, [RABBIT_HOLE + 16, 0]), (0.0, 0.0));
        assert_eq!(r(&g, [0, 15]), (0.0, 0.0));
        assert_eq!(r(&g, [RABBIT_CAUGHT, 0]), (0.0, 0.0));
    }

    #[test]
    fn prize_is_collected_once_and_catch_absorbs() {
        let g = build_rabbit_hole(&EnvParams::default()).unwrap();
        let next = |c: [usize; 2], a: [usize; 2]| {
            let x = g.states().joint(&c).unwrap();
            let row = g.joint_transition_row(&x, &a).unwrap();
            g.states().unflatten(row.iter().position(|&p| p == 1.0).unwrap())
        };
        // in the hole, staying keeps the flag set
        assert_eq!(next([RABBIT_HOLE, 0], [0, 0]), vec![RABBIT_HOLE + 16, 0]);
        assert_eq!(next([RABBIT_HOLE + 16, 0], [1, 0]), vec![1 + 16, 0]);
        assert_eq!(next([9, 9], [1, 0]), vec![RABBIT_CAUGHT, 9]);
        assert_eq!(next([RABBIT_CAUGHT, 9], [1, 2]), vec![RABBIT_CAUGHT, 13]);
    }
}
