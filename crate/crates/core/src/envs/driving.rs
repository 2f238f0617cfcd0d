//! Three cars and a pedestrian at a junction, as an occupancy-coupled game
//! on a 7x7 cell grid (`cell = row * 7 + col`):
//!
//! ```text
//!      0 1 2 3 4 5 6
//!   0  . . 1 2 3 . .      1 2 3   goals of car 1, 2, 3
//!   1  . . = = = . .      =       road
//!   2  - - - Z - - -      Z       zebra crossing, - sidewalk
//!   3  = a = + = c =      + junction centre
//!   4  . . . b . . .      a b c   starts of car 1, 2, 3
//!   5  . . . = . . .
//!   6  . . . = . . .
//! ```
//!
//! The pedestrian walks the sidewalk of row 2 from column 1 to column 5 and
//! has to cross the zebra cell. Cars drive on road cells, the zebra and the
//! goal row; the pedestrian only on sidewalk cells and the zebra. Moving
//! onto a cell outside an agent's area leaves it in place. Goals are
//! absorbing and pay `GOAL_REWARD` per step, and as final reward.
//!
//! The plain forward-backward alternation oscillates on this scene; with
//! the defaults here it settles under `FbConfig { alpha: 0.5, .. }`.

use super::{grid_move, names, EnvParams, MOVE_NAMES};
use crate::error::{Error, Result};
use crate::occupancy::{InteractionFunctional, SimplifiedGame};
use crate::table::Table;

pub const DRIVING_HORIZON: usize = 16;
const SIDE: usize = 7;
const GOAL_REWARD: f64 = 1.0;
const MU_CAR: f64 = 1.0;
const DRIVING_BETA: f64 = 2.0;
const MU_PEDESTRIAN: f64 = 10.0;

const fn cell(r: usize, c: usize) -> usize {
    r * SIDE + c
}

/// Cell sets of the junction.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivingLayout {
    /// Starts of car 1, car 2, car 3, pedestrian.
    pub starts: [usize; 4],
    pub goals: [usize; 4],
    pub road: Vec<usize>,
    pub sidewalk: Vec<usize>,
    pub zebra: Vec<usize>,
    /// Cells shared by all car routes.
    pub junction: Vec<usize>,
}

impl DrivingLayout {
    pub fn standard() -> Self {
        let mut road: Vec<usize> = (0..SIDE).map(|c| cell(3, c)).collect();
        road.extend([4, 5, 6].map(|r| cell(r, 3)));
        road.extend([2, 3, 4].map(|c| cell(1, c)));
        road.extend([2, 3, 4].map(|c| cell(0, c)));
        let sidewalk = (0..SIDE).filter(|&c| c != 3).map(|c| cell(2, c)).collect();
        DrivingLayout {
            starts: [cell(3, 1), cell(4, 3), cell(3, 5), cell(2, 1)],
            goals: [cell(0, 2), cell(0, 3), cell(0, 4), cell(2, 5)],
            road,
            sidewalk,
            zebra: vec![cell(2, 3)],
            junction: vec![cell(3, 3), cell(2, 3), cell(1, 3)],
        }
    }

    pub fn num_cells(&self) -> usize {
        SIDE * SIDE
    }

    pub fn side(&self) -> usize {
        SIDE
    }

    fn allowed(&self, agent: usize) -> Vec<bool> {
        let mut ok = vec![false; self.num_cells()];
        let area = if agent == 3 { &self.sidewalk } else { &self.road };
        for &c in area.iter().chain(&self.zebra) {
            ok[c] = true;
        }
        ok
    }
}

/// Builds the scene; `params.mu` overrides the penalty weights (car 1, car
/// 2, car 3, pedestrian, or one value for all four), `params.initial` the
/// four starting cells.
pub fn build_driving_scene(params: &EnvParams) -> Result<SimplifiedGame> {
    let mut layout = DrivingLayout::standard();
    if let Some(init) = &params.initial {
        layout.starts = init
            .as_slice()
            .try_into()
            .map_err(|_| Error::Dimension(format!("driving scene needs 4 starts, got {}", init.len())))?;
    }
    if params.gamma.is_some() {
        return Err(Error::InvalidArgument(
            "the driving scene is finite-horizon only".into(),
        ));
    }
    let n = layout.num_cells();
    let na = MOVE_NAMES.len();
    let mut rewards = Vec::new();
    let mut final_rewards = Vec::new();
    let mut transitions = Vec::new();
    for agent in 0..4 {
        let ok = layout.allowed(agent);
        let goal = layout.goals[agent];
        if !ok[layout.starts[agent]] {
            return Err(Error::InvalidArgument(format!(
                "start cell {} of agent {agent} is outside its area",
                layout.starts[agent]
            )));
        }
        let mut t = Table::zeros(n * na, n);
        for x in 0..n {
            for a in 0..na {
                let next = match grid_move(x, a, SIDE, SIDE) {
                    Some(y) if x != goal && ok[x] && ok[y] => y,
                    _ => x,
                };
                t.set(x * na + a, next, 1.0);
            }
        }
        let mut r = Table::zeros(n, na);
        r.row_mut(goal).iter_mut().for_each(|v| *v = GOAL_REWARD);
        let mut f = vec![0.0; n];
        f[goal] = GOAL_REWARD;
        rewards.push(r);
        final_rewards.push(f);
        transitions.push(t);
    }
    let weights = match params.mu.as_deref() {
        None => vec![MU_CAR, MU_CAR, MU_CAR, MU_PEDESTRIAN],
        Some(&[mu]) => vec![mu; 4],
        Some(mu) => mu.to_vec(),
    };
    let game = SimplifiedGame {
        num_states: n,
        num_actions: na,
        rewards,
        final_rewards,
        transitions,
        horizon: params.horizon.unwrap_or(DRIVING_HORIZON),
        beta: params.beta.unwrap_or(DRIVING_BETA),
        psi: InteractionFunctional::LinearPenalty { weights },
        initial_states: layout.starts.to_vec(),
        agent_names: names(&["car1", "car2", "car3", "pedestrian"]),
        state_names: (0..n).map(|c| format!("r{}c{}", c / SIDE, c % SIDE)).collect(),
    };
    game.validate()?;
    Ok(game)
}
