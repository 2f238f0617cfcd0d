//! Builders for the built-in games, addressable by name.
//!
//! | name          | agents                  | kind       | default horizon |
//! |---------------|-------------------------|------------|-----------------|
//! | `pursuit-2p`  | hunter, prey            | Markov     | 22              |
//! | `pursuit-3p`  | hunter1, hunter2, prey  | Markov     | 3               |
//! | `rabbit-hole` | rabbit, fox             | Markov     | 12              |
//! | `grid-1`      | A, B                    | Markov     | 8               |
//! | `grid-2`      | A, B                    | Markov     | 8               |
//! | `driving`     | car1, car2, car3, ped   | simplified | 16              |
//!
//! Every Markov builder uses state-based rewards `r_i(x)` (identical for all
//! own actions) and, in finite-horizon mode, the final reward
//! `R_{i,F}(x) = r_i(x)`, so the last visited state is scored like every
//! other. Unless an explicit initial placement is given, `P0` is uniform
//! over the environment's admissible starting placements (pursuit-3p
//! defaults to the start `{1, 5, 2}`).

mod driving;
mod grid;
mod pursuit;
mod rabbit;
mod random;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParts, JointIndex, Kernel, MarkovGame};
use crate::occupancy::SimplifiedGame;
use crate::table::Table;

pub use driving::{build_driving_scene, DrivingLayout, DRIVING_HORIZON};
pub use grid::{build_grid_game_1, build_grid_game_2};
pub use pursuit::{build_pursuit_2p, build_pursuit_3p, PURSUIT_ACTIONS};
pub use rabbit::{build_rabbit_hole, RABBIT_CAUGHT, RABBIT_HOLE};
pub use random::{generate_random_game, generate_random_simplified, RandomGameSpec, RandomSimplifiedSpec};

pub const BUILTIN_NAMES: [&str; 6] = ["pursuit-2p", "pursuit-3p", "rabbit-hole", "grid-1", "grid-2", "driving"];

/// Overrides accepted by every builder; unset fields keep the defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub beta: Option<f64>,
    pub horizon: Option<usize>,
    /// Switches a Markov game to discounted mode.
    pub gamma: Option<f64>,
    /// Initial placement, one component per agent. Sets `P0` to a point mass.
    pub initial: Option<Vec<usize>>,
    /// Penalty weights of the driving scene, one per agent or one for all.
    pub mu: Option<Vec<f64>>,
}

pub enum BuiltGame {
    Markov(MarkovGame),
    Simplified(SimplifiedGame),
}

pub fn is_builtin(name: &str) -> bool {
    BUILTIN_NAMES.contains(&name)
}

pub fn build(name: &str, params: &EnvParams) -> Result<BuiltGame> {
    Ok(match name {
        "pursuit-2p" => BuiltGame::Markov(build_pursuit_2p(params)?),
        "pursuit-3p" => BuiltGame::Markov(build_pursuit_3p(params)?),
        "rabbit-hole" => BuiltGame::Markov(build_rabbit_hole(params)?),
        "grid-1" => BuiltGame::Markov(build_grid_game_1(params)?),
        "grid-2" => BuiltGame::Markov(build_grid_game_2(params)?),
        "driving" => BuiltGame::Simplified(build_driving_scene(params)?),
        other => return Err(Error::UnknownEnvironment(other.to_string())),
    })
}

pub fn build_markov(name: &str, params: &EnvParams) -> Result<MarkovGame> {
    match build(name, params)? {
        BuiltGame::Markov(g) => Ok(g),
        BuiltGame::Simplified(_) => Err(Error::InvalidArgument(format!(
            "`{name}` is an occupancy-coupled game, not a Markov game"
        ))),
    }
}

/// The fixed starting placement used when `P0` is not sampled.
pub fn default_initial(name: &str) -> Result<Vec<usize>> {
    Ok(match name {
        "pursuit-2p" => pursuit::DEFAULT_INITIAL_2P.to_vec(),
        "pursuit-3p" => pursuit::DEFAULT_INITIAL_3P.to_vec(),
        "rabbit-hole" => rabbit::DEFAULT_INITIAL.to_vec(),
        "grid-1" => grid::INITIAL.to_vec(),
        "grid-2" => grid::INITIAL.to_vec(),
        "driving" => DrivingLayout::standard().starts.to_vec(),
        other => return Err(Error::UnknownEnvironment(other.to_string())),
    })
}

/// Predicate on joint-state components counted once per visited state.
#[derive(Clone)]
pub struct EventDetector {
    pub name: String,
    pub detect: Arc<dyn Fn(&[usize]) -> bool + Send + Sync>,
}

impl EventDetector {
    pub fn new(name: &str, detect: impl Fn(&[usize]) -> bool + Send + Sync + 'static) -> Self {
        EventDetector {
            name: name.to_string(),
            detect: Arc::new(detect),
        }
    }
}

impl std::fmt::Debug for EventDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventDetector").field("name", &self.name).finish()
    }
}

/// Event detectors of a built-in Markov game; empty for unknown names.
pub fn events_for(name: &str) -> Vec<EventDetector> {
    match name {
        "pursuit-2p" => pursuit::events_2p(),
        "pursuit-3p" => pursuit::events_3p(),
        "rabbit-hole" => rabbit::events(),
        "grid-1" => grid::events_1(),
        "grid-2" => grid::events_2(),
        _ => Vec::new(),
    }
}

/// Four-neighbour moves on a `rows x cols` grid, row-major cells.
pub(crate) const STAY: usize = 0;
pub(crate) const UP: usize = 1;
pub(crate) const DOWN: usize = 2;
pub(crate) const LEFT: usize = 3;
pub(crate) const RIGHT: usize = 4;
pub(crate) const MOVE_NAMES: [&str; 5] = ["stay", "up", "down", "left", "right"];

/// Target cell of a four-neighbour move; `None` when it leaves the grid.
pub(crate) fn grid_move(cell: usize, action: usize, rows: usize, cols: usize) -> Option<usize> {
    let (r, c) = (cell / cols, cell % cols);
    let (r, c) = match action {
        STAY => (r, c),
        UP => (r.checked_sub(1)?, c),
        DOWN => (r + 1, c),
        LEFT => (r, c.checked_sub(1)?),
        RIGHT => (r, c + 1),
        _ => return None,
    };
    (r < rows && c < cols).then_some(r * cols + c)
}

/// Ingredients of a game whose agents move independently given the
/// current joint state.
pub(crate) struct ProductSpec<'a> {
    pub state_sizes: Vec<usize>,
    pub num_actions: usize,
    /// Next-state distribution of agent `i` from joint state `x` under its
    /// own action.
    pub step: &'a dyn Fn(usize, &[usize], usize) -> Vec<(usize, f64)>,
    /// State reward `r_i(x)`.
    pub reward: &'a dyn Fn(usize, &[usize]) -> f64,
    /// Admissible starting placements for the uniform `P0`.
    pub placement: &'a dyn Fn(&[usize]) -> bool,
    pub agent_names: Vec<String>,
    pub action_names: Vec<String>,
    pub default_horizon: usize,
}

pub(crate) fn product_game(spec: ProductSpec<'_>, params: &EnvParams) -> Result<MarkovGame> {
    let m = spec.state_sizes.len();
    let states = JointIndex::new(spec.state_sizes.clone())?;
    let jas = JointIndex::new(vec![spec.num_actions; m])?;
    let n = states.len();
    let mut rows = Vec::with_capacity(n * jas.len());
    for x in 0..n {
        let comps = states.unflatten(x);
        let per_agent: Vec<Vec<Vec<(usize, f64)>>> = (0..m)
            .map(|i| (0..spec.num_actions).map(|a| (spec.step)(i, &comps, a)).collect())
            .collect();
        for ja in 0..jas.len() {
            let acts = jas.unflatten(ja);
            let mut row: Vec<(Vec<usize>, f64)> = vec![(Vec::with_capacity(m), 1.0)];
            for i in 0..m {
                let mut grown = Vec::with_capacity(row.len());
                for (prefix, p) in &row {
                    for &(s, q) in &per_agent[i][acts[i]] {
                        let mut next = prefix.clone();
                        next.push(s);
                        grown.push((next, p * q));
                    }
                }
                row = grown;
            }
            rows.push(
                row.into_iter()
                    .map(|(c, p)| Ok((states.flatten(&c)?, p)))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
    }
    let transition = Kernel::from_sparse_rows(n, jas.len(), rows)?;

    let state_reward: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..n).map(|x| (spec.reward)(i, &states.unflatten(x))).collect())
        .collect();
    let rewards = state_reward
        .iter()
        .map(|r| {
            let mut t = Table::zeros(n, spec.num_actions);
            for (x, &v) in r.iter().enumerate() {
                t.row_mut(x).iter_mut().for_each(|e| *e = v);
            }
            t
        })
        .collect();

    let initial_dist = match &params.initial {
        Some(init) => {
            if init.len() != m {
                return Err(Error::Dimension(format!(
                    "initial placement has {} components for {m} agents",
                    init.len()
                )));
            }
            let mut p0 = vec![0.0; n];
            p0[states.flatten(init)?] = 1.0;
            p0
        }
        None => {
            let ok: Vec<bool> = (0..n).map(|x| (spec.placement)(&states.unflatten(x))).collect();
            let count = ok.iter().filter(|&&b| b).count();
            if count == 0 {
                return Err(Error::InvalidArgument("no admissible initial placement".into()));
            }
            ok.iter().map(|&b| if b { 1.0 / count as f64 } else { 0.0 }).collect()
        }
    };
    let (discount, horizon, final_rewards) = match params.gamma {
        Some(g) => (Some(g), None, None),
        None => (
            None,
            Some(params.horizon.unwrap_or(spec.default_horizon)),
            Some(state_reward),
        ),
    };
    MarkovGame::from_parts(GameParts {
        state_sizes: spec.state_sizes,
        num_actions: spec.num_actions,
        transition,
        rewards,
        final_rewards,
        initial_dist,
        discount,
        horizon,
        beta: params.beta.unwrap_or(1.0),
        agent_names: spec.agent_names,
        action_names: spec.action_names,
    })
}

pub(crate) fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}
