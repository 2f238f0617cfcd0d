//! Convergence traces and their CSV form.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Per-sweep sup-norm residuals `max_j ‖Q_j^{s+1} − Q_j^s‖_∞` of one
/// fixed-point run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub residuals: Vec<f64>,
    /// Wall-clock milliseconds spent in each sweep; excluded from replay
    /// comparisons.
    pub wall_ms: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub wall_time_ms: f64,
}

impl SolveTrace {
    pub(crate) fn record(&mut self, residual: f64, started: Instant) {
        self.residuals.push(residual);
        self.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
        self.sweeps += 1;
    }

    pub(crate) fn finish(&mut self, converged: bool, started: Instant) {
        self.converged = converged;
        self.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    /// Writes `sweep,residual,wall_ms` rows; sweeps are 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sweep", "residual", "wall_ms"])?;
        for (s, (r, ms)) in self.residuals.iter().zip(&self.wall_ms).enumerate() {
            w.write_record([(s + 1).to_string(), fmt_f64(*r), fmt_f64(*ms)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `stage,inner_iter,residual` rows for a list of per-stage traces
/// where `traces[k]` belongs to stage `stages[k]`.
pub fn write_stage_csv<W: Write>(stages: &[usize], traces: &[SolveTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "inner_iter", "residual"])?;
    for (stage, trace) in stages.iter().zip(traces) {
        for (s, r) in trace.residuals.iter().enumerate() {
            w.write_record([stage.to_string(), (s + 1).to_string(), fmt_f64(*r)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_and_round_trip() {
        let t = SolveTrace {
            residuals: vec![0.5, 1e-9],
            wall_ms: vec![0.25, 0.125],
            converged: true,
            sweeps: 2,
            wall_time_ms: 0.375,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sweep,residual,wall_ms");
        assert_eq!(lines[2], "2,1e-9,0.125");
        let parsed: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 1e-9);
    }

    #[test]
    fn stage_csv_rows() {
        let a = SolveTrace {
            residuals: vec![1.0, 0.5],
            ..Default::default()
        };
        let b = SolveTrace {
            residuals: vec![0.25],
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_stage_csv(&[1, 0], &[a, b], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "stage,inner_iter,residual\n1,1,1.0\n1,2,0.5\n0,1,0.25\n");
    }
}
