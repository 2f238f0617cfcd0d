//! Output files: versioned JSON formats for Q tables and policies, the run
//! manifest, and seed substreams.
//!
//! `q_tables.json` and `policies.json` carry `format` and `version` keys.
//! Tables are `{"rows", "cols", "data"}` with row-major `data`; rows are
//! flat joint states (or cells of an occupancy-coupled scene), columns own
//! actions.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use mge_core::Table;

use crate::failure::{CliResult, Failure};
use crate::source::GameArgs;
use crate::Command;

pub const FORMAT_VERSION: u32 = 1;

/// Named random streams derived from the single `--seed`.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Init = 1,
    Rollout = 2,
}

pub fn substream(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// Tables of a solved game; `tables[τ][i]` for time-indexed solutions and
/// `tables[0][i]` for stationary ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSet {
    pub format: String,
    pub version: u32,
    pub solver: String,
    /// `true` when the first index is the time step.
    pub time_indexed: bool,
    pub agent_names: Vec<String>,
    pub action_names: Vec<String>,
    /// The game the tables belong to, for commands that rebuild it.
    pub game: GameArgs,
    pub tables: Vec<Vec<Table>>,
}

impl TableSet {
    pub fn new(
        kind: &str,
        solver: &str,
        time_indexed: bool,
        game: &GameArgs,
        names: (Vec<String>, Vec<String>),
        tables: Vec<Vec<Table>>,
    ) -> Self {
        TableSet {
            format: kind.to_string(),
            version: FORMAT_VERSION,
            solver: solver.to_string(),
            time_indexed,
            agent_names: names.0,
            action_names: names.1,
            game: game.resolved(),
            tables,
        }
    }

    pub fn read(path: &Path, kind: &str) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let set: TableSet = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        if set.format != kind || set.version != FORMAT_VERSION {
            return Err(Failure::input(format!(
                "{}: expected {kind} version {FORMAT_VERSION}, found {} version {}",
                path.display(),
                set.format,
                set.version
            )));
        }
        Ok(set)
    }
}

/// Written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// The command with every option resolved, replayable as is.
    pub command: Command,
    pub seed: u64,
    /// Artifact file names relative to the output directory.
    pub artifacts: Vec<String>,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub wall_time_ms: f64,
}

/// Collects artifacts and warnings of one run in its output directory.
pub struct Run {
    pub out: PathBuf,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub converged: bool,
    started: Instant,
}

impl Run {
    pub fn start(out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| Failure::input(format!("cannot create {}: {e}", out.display())))?;
        Ok(Run {
            out: out.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
            converged: true,
            started: Instant::now(),
        })
    }

    /// Opens `name` for writing and records it as an artifact.
    pub fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value)?;
        Ok(())
    }

    pub fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    pub fn finish(self, command: Command, seed: u64) -> CliResult<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed,
            artifacts: self.artifacts,
            converged: self.converged,
            warnings: self.warnings,
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let file = File::create(self.out.join("manifest.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_stable_and_distinct() {
        assert_eq!(substream(5, Stream::Init), substream(5, Stream::Init));
        assert_ne!(substream(5, Stream::Init), substream(5, Stream::Rollout));
        assert_ne!(substream(5, Stream::Init), substream(6, Stream::Init));
    }
}
