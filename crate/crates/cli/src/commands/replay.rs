use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::artifacts::Manifest;
use crate::failure::{CliResult, Failure};
use crate::Command;

/// Timing columns that legitimately differ between runs.
const TIMING_COLUMNS: [&str; 1] = ["wall_ms"];

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// `manifest.json` of the run to reproduce.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory of the re-run; `replay/` next to the manifest by
    /// default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// CSV text with the timing columns removed; other files unchanged.
fn comparable(path: &Path) -> CliResult<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    if path.extension().and_then(|e| e.to_str()) != Some("csv") {
        return Ok(bytes);
    }
    let text = String::from_utf8_lossy(&bytes);
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Ok(bytes);
    };
    let keep: Vec<bool> = header.split(',').map(|h| !TIMING_COLUMNS.contains(&h)).collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(lines) {
        let fields: Vec<&str> = line
            .split(',')
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f)
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out.into_bytes())
}

pub fn run(args: &ReplayArgs) -> CliResult<()> {
    let file = File::open(&args.manifest).map_err(|e| Failure::input(format!("{}: {e}", args.manifest.display())))?;
    let manifest: Manifest = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Failure::input(format!("{}: {e}", args.manifest.display())))?;
    if matches!(manifest.command, Command::Replay(_)) {
        return Err(Failure::input("a replay manifest cannot be replayed"));
    }
    let original = args.manifest.parent().unwrap_or(Path::new("."));
    let out = args.out.clone().unwrap_or_else(|| original.join("replay"));
    manifest.command.with_out(out.clone()).run()?;
    let mut differing = Vec::new();
    for name in &manifest.artifacts {
        let same = comparable(&original.join(name))? == comparable(&out.join(name))?;
        let _ = writeln!(
            std::io::stdout(),
            "{name}: {}",
            if same { "identical" } else { "differs" }
        );
        if !same {
            differing.push(name.clone());
        }
    }
    if differing.is_empty() {
        Ok(())
    } else {
        Err(Failure::internal(format!("replay differs in {}", differing.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_column_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        std::fs::write(&a, "sweep,residual,wall_ms\n1,0.5,3.25\n").unwrap();
        std::fs::write(&b, "sweep,residual,wall_ms\n1,0.5,9.0\n").unwrap();
        assert_eq!(comparable(&a).unwrap(), comparable(&b).unwrap());
        assert_eq!(comparable(&a).unwrap(), b"sweep,residual\n1,0.5\n");
        let j = dir.path().join("c.json");
        std::fs::write(&j, "{\"wall_ms\": 1}").unwrap();
        assert_eq!(comparable(&j).unwrap(), b"{\"wall_ms\": 1}");
    }
}
