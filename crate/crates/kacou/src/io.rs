//! CSV/JSON emission with atomic writes, and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{KacError, Result};
use crate::model::KacOuModel;
pub use crate::sim::{CensorCounts, FptCaps};

/// Round-trip formatting (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV table; every numeric cell must be finite.
#[derive(Debug, Clone)]
pub struct CsvTable {
    text: String,
    columns: usize,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn push(&mut self, row: &[Cell]) -> Result<()> {
        if row.len() != self.columns {
            return Err(KacError::Io(format!("row has {} cells, header has {}", row.len(), self.columns)));
        }
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(v) if v.is_finite() => Ok(fmt_f64(*v)),
                Cell::Num(v) => Err(KacError::Io(format!("non-finite value {v} in CSV output"))),
                Cell::Int(i) => Ok(i.to_string()),
                Cell::Text(s) => Ok(s.clone()),
                Cell::Empty => Ok(String::new()),
            })
            .collect::<Result<_>>()?;
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| KacError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| KacError::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Git-style content hash: sha256 over `blob <len>\0<text>`.
pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub kacou: &'static str,
    pub output_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self { kacou: env!("CARGO_PKG_VERSION"), output_format: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub regime: String,
    pub model: Option<KacOuModel>,
    pub caps: Option<FptCaps>,
    pub versions: Versions,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub censored: CensorCounts,
    pub outputs: Vec<PathBuf>,
    /// Free-form notes (conventions applied during the run).
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for &v in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_rejects_non_finite() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(&[Cell::Num(1.0), Cell::Int(2)]).unwrap();
        assert!(t.push(&[Cell::Num(f64::NAN), Cell::Empty]).is_err());
        assert!(t.push(&[Cell::Empty]).is_err());
        assert_eq!(t.as_str(), "a,b\n1.0000000000000000e0,2\n");
    }

    #[test]
    fn hash_matches_git_blob_framing() {
        // printf 'blob 6\0hello\n' | sha256sum
        assert_eq!(content_hash("hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
