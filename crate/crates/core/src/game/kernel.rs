use crate::error::{Error, Result};

/// Largest dense kernel (in stored entries) built automatically; anything
/// bigger is kept as a list of nonzeros per row.
pub const DENSE_ENTRY_LIMIT: usize = 1 << 22;

/// Joint transition kernel `P(x' | x, a⃗)` with rows indexed by
/// `x * joint_actions + a⃗`.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Dense {
        states: usize,
        joint_actions: usize,
        probs: Vec<f64>,
    },
    Sparse {
        states: usize,
        joint_actions: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// One row of the kernel.
#[derive(Clone, Copy, Debug)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse(&'a [usize], &'a [f64]),
}

impl<'a> Row<'a> {
    /// Nonzero-or-stored `(next state, probability)` pairs.
    pub fn iter(self) -> Box<dyn Iterator<Item = (usize, f64)> + 'a> {
        match self {
            Row::Dense(p) => Box::new(p.iter().copied().enumerate()),
            Row::Sparse(c, v) => Box::new(c.iter().copied().zip(v.iter().copied())),
        }
    }

    /// `Σ_{x'} P(x'|·) f(x')`.
    #[inline]
    pub fn expect(self, f: &[f64]) -> f64 {
        match self {
            Row::Dense(p) => p.iter().zip(f).map(|(p, v)| p * v).sum(),
            Row::Sparse(c, v) => c.iter().zip(v).map(|(&j, p)| p * f[j]).sum(),
        }
    }

    pub fn sum(self) -> f64 {
        match self {
            Row::Dense(p) => p.iter().sum(),
            Row::Sparse(_, v) => v.iter().sum(),
        }
    }

    pub fn to_dense(self, states: usize) -> Vec<f64> {
        let mut out = vec![0.0; states];
        for (j, p) in self.iter() {
            out[j] += p;
        }
        out
    }
}

impl Kernel {
    /// Builds a kernel from sparse rows, choosing the dense layout whenever
    /// it fits in [`DENSE_ENTRY_LIMIT`] entries.
    pub fn from_sparse_rows(states: usize, joint_actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let dense_entries = states.checked_mul(joint_actions).and_then(|n| n.checked_mul(states));
        match dense_entries {
            Some(n) if n <= DENSE_ENTRY_LIMIT => Self::dense_from_rows(states, joint_actions, rows),
            _ => Self::sparse_from_rows(states, joint_actions, rows),
        }
    }

    pub fn dense_from_rows(states: usize, joint_actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        check_row_count(states, joint_actions, rows.len())?;
        let mut probs = vec![0.0; states * joint_actions * states];
        for (r, row) in rows.into_iter().enumerate() {
            for (j, p) in row {
                if j >= states {
                    return Err(Error::OutOfRange(format!("successor {j} >= {states}")));
                }
                probs[r * states + j] += p;
            }
        }
        Ok(Kernel::Dense {
            states,
            joint_actions,
            probs,
        })
    }

    pub fn sparse_from_rows(states: usize, joint_actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        check_row_count(states, joint_actions, rows.len())?;
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (j, p) in row {
                if j >= states {
                    return Err(Error::OutOfRange(format!("successor {j} >= {states}")));
                }
                if cols.len() > start && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += p;
                } else {
                    cols.push(j);
                    vals.push(p);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Kernel::Sparse {
            states,
            joint_actions,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn states(&self) -> usize {
        match self {
            Kernel::Dense { states, .. } | Kernel::Sparse { states, .. } => *states,
        }
    }

    pub fn joint_actions(&self) -> usize {
        match self {
            Kernel::Dense { joint_actions, .. } | Kernel::Sparse { joint_actions, .. } => *joint_actions,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Kernel::Dense { .. })
    }

    #[inline]
    pub fn row(&self, state: usize, joint_action: usize) -> Row<'_> {
        match self {
            Kernel::Dense {
                states,
                joint_actions,
                probs,
            } => {
                let r = state * joint_actions + joint_action;
                Row::Dense(&probs[r * states..(r + 1) * states])
            }
            Kernel::Sparse {
                joint_actions,
                row_ptr,
                cols,
                vals,
                ..
            } => {
                let r = state * joint_actions + joint_action;
                let (a, b) = (row_ptr[r], row_ptr[r + 1]);
                Row::Sparse(&cols[a..b], &vals[a..b])
            }
        }
    }

    pub fn to_sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = Vec::with_capacity(self.states() * self.joint_actions());
        for x in 0..self.states() {
            for ja in 0..self.joint_actions() {
                out.push(self.row(x, ja).iter().filter(|e| e.1 != 0.0).collect());
            }
        }
        out
    }
}

fn check_row_count(states: usize, joint_actions: usize, rows: usize) -> Result<()> {
    if rows != states * joint_actions {
        return Err(Error::Dimension(format!(
            "kernel needs {} rows ({states} states x {joint_actions} joint actions), got {rows}",
            states * joint_actions
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<Vec<(usize, f64)>> {
        vec![
            vec![(1, 1.0)],
            vec![(0, 0.25), (1, 0.75)],
            vec![(0, 1.0)],
            vec![(1, 0.5), (0, 0.5)],
        ]
    }

    #[test]
    fn dense_and_sparse_agree() {
        let d = Kernel::dense_from_rows(2, 2, rows()).unwrap();
        let s = Kernel::sparse_from_rows(2, 2, rows()).unwrap();
        let f = [3.0, -1.0];
        for x in 0..2 {
            for a in 0..2 {
                assert_eq!(d.row(x, a).to_dense(2), s.row(x, a).to_dense(2));
                assert!((d.row(x, a).expect(&f) - s.row(x, a).expect(&f)).abs() < 1e-15);
            }
        }
        assert!(Kernel::from_sparse_rows(2, 2, rows()).unwrap().is_dense());
    }

    #[test]
    fn bad_successor_rejected() {
        let mut r = rows();
        r[0] = vec![(7, 1.0)];
        assert!(Kernel::sparse_from_rows(2, 2, r.clone()).is_err());
        assert!(Kernel::dense_from_rows(2, 2, r).is_err());
    }
}
