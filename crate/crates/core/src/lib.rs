//! Solvers for Markov games in which every agent plays a Boltzmann mixed
//! strategy over its own Q-function.
//!
//! The coupled Bellman system is solved by fixed-point iteration in three
//! flavours: infinite horizon ([`infinite`]), finite horizon with per-stage
//! inner fixed points ([`finite`]) and the occupancy-coupled forward-backward
//! scheme ([`occupancy`]). [`irl`] holds the multi-agent maximum causal
//! entropy recursion and the online feature-matching loop built on top of
//! the finite-horizon solver.

pub mod boltzmann;
pub mod envs;
pub mod error;
pub mod finite;
pub mod game;
pub mod infinite;
pub mod irl;
pub mod occupancy;
pub mod rollout;
pub mod table;
pub mod trace;

mod backup;

pub use error::{Error, Result};
pub use game::{HorizonMode, JointIndex, JointState, MarkovGame};
pub use table::Table;

/// Absolute tolerance for probability rows of transition kernels and `P0`.
pub const PROB_TOL: f64 = 1e-12;

/// Absolute tolerance for the rows of Boltzmann policy tables.
pub const POLICY_TOL: f64 = 1e-10;
