//! Boltzmann (Gibbs) policies `π(a|x) ∝ exp(β Q(x,a))` and the soft value
//! `V(x) = Σ_a π(a|x) Q(x,a)`.
//!
//! Every exponentiation subtracts the row maximum first; β is never clipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Table;

/// Per-agent Q table over (flat joint state, own action).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub agent: usize,
    pub time_step: Option<usize>,
    pub values: Table,
}

/// Per-agent conditional action distribution given the joint state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub agent: usize,
    pub time_step: Option<usize>,
    pub probs: Table,
}

impl QFunction {
    pub fn new(agent: usize, values: Table) -> Self {
        QFunction {
            agent,
            time_step: None,
            values,
        }
    }

    pub fn at_time(mut self, time_step: usize) -> Self {
        self.time_step = Some(time_step);
        self
    }

    pub fn zeros(agent: usize, states: usize, actions: usize) -> Self {
        Self::new(agent, Table::zeros(states, actions))
    }
}

impl PolicyTable {
    #[inline]
    pub fn row(&self, state: usize) -> &[f64] {
        self.probs.row(state)
    }
}

/// Writes `Exp_β(q)` into `out`.
#[inline]
pub fn boltzmann_row(q: &[f64], beta: f64, out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o = (beta * (v - max)).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// Boltzmann policy of `q` at inverse temperature `beta`.
pub fn boltzmann_policy(q: &QFunction, beta: f64) -> Result<PolicyTable> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be positive")));
    }
    if !q.values.all_finite() {
        return Err(Error::NonFinite(format!("Q-function of agent {}", q.agent)));
    }
    Ok(PolicyTable {
        agent: q.agent,
        time_step: q.time_step,
        probs: boltzmann_table(&q.values, beta),
    })
}

/// Row-wise Boltzmann transform without argument checks.
pub(crate) fn boltzmann_table(q: &Table, beta: f64) -> Table {
    let mut out = Table::zeros(q.rows(), q.cols());
    for x in 0..q.rows() {
        boltzmann_row(q.row(x), beta, out.row_mut(x));
    }
    out
}

/// `V(x) = Σ_a π(a|x) q(x,a)` for every joint state.
pub fn soft_value(q: &QFunction, policy: &PolicyTable) -> Result<Vec<f64>> {
    if !q.values.same_shape(&policy.probs) {
        return Err(Error::Dimension(format!(
            "Q is {}x{}, policy is {}x{}",
            q.values.rows(),
            q.values.cols(),
            policy.probs.rows(),
            policy.probs.cols()
        )));
    }
    Ok(expected_rows(&q.values, &policy.probs))
}

pub(crate) fn expected_rows(q: &Table, probs: &Table) -> Vec<f64> {
    (0..q.rows()).map(|x| dot(q.row(x), probs.row(x))).collect()
}

/// Soft value of a single row under its own Boltzmann policy,
/// `g(q) = Σ_a Exp_β(q)_a q_a`.
pub fn soft_value_row(q: &[f64], beta: f64) -> f64 {
    let mut p = vec![0.0; q.len()];
    boltzmann_row(q, beta, &mut p);
    dot(q, &p)
}

/// Soft values of every row of `q` under its own Boltzmann policy.
pub(crate) fn self_soft_values(q: &Table, beta: f64) -> Vec<f64> {
    let mut p = vec![0.0; q.cols()];
    (0..q.rows())
        .map(|x| {
            boltzmann_row(q.row(x), beta, &mut p);
            dot(q.row(x), &p)
        })
        .collect()
}

/// `log Σ exp(v)`, computed with max-subtraction.
pub fn softmax_log(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("softmax of an empty vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    Ok(log_sum_exp(values))
}

#[inline]
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `‖Exp_β(q1) − Exp_β(q2)‖_1`.
pub fn policy_l1_distance(q1: &[f64], q2: &[f64], beta: f64) -> Result<f64> {
    if q1.len() != q2.len() {
        return Err(Error::Dimension(format!(
            "rows of length {} and {}",
            q1.len(),
            q2.len()
        )));
    }
    let mut p1 = vec![0.0; q1.len()];
    let mut p2 = vec![0.0; q2.len()];
    boltzmann_row(q1, beta, &mut p1);
    boltzmann_row(q2, beta, &mut p2);
    Ok(crate::table::l1_distance(&p1, &p2))
}

/// Index of the largest entry, lowest index on exact ties.
pub fn argmax(row: &[f64]) -> usize {
    argmax_with_tolerance(row, 0.0)
}

/// Lowest index whose entry is within `tol` of the row maximum.
pub fn argmax_with_tolerance(row: &[f64], tol: f64) -> usize {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|&v| v >= max - tol).unwrap_or(0)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
