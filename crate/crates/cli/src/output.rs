//! Deterministic artifact writing: CSV and JSON reports, binary field
//! snapshots and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hardylab_core::{Field, Grid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"HLSNAP01";
/// Complex128 values stored as `(re, im)` pairs of little-endian `f64`.
pub const DTYPE_COMPLEX128: u32 = 1;
pub const SNAPSHOT_HEADER_BYTES: usize = 8 + 4 * 4 + 8 + 8;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub diagnostic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

/// A directory of artifacts; every write is recorded for the manifest.
#[derive(Debug)]
pub struct OutputTree {
    root: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl OutputTree {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(Self { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, rel: &str, diagnostic: &str, bytes: &[u8]) -> CliResult<String> {
        atomic_write(&self.root.join(rel), bytes)?;
        self.files.insert(
            rel.to_string(),
            FileEntry {
                path: rel.to_string(),
                diagnostic: diagnostic.to_string(),
                bytes: Some(bytes.len() as u64),
                sha256: Some(hex_digest(bytes)),
            },
        );
        Ok(rel.to_string())
    }

    pub fn write_csv(
        &mut self,
        rel: &str,
        diagnostic: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> CliResult<String> {
        self.write_bytes(rel, diagnostic, &csv_bytes(header, rows))
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, diagnostic: &str, value: &T) -> CliResult<String> {
        self.write_bytes(rel, diagnostic, &json_bytes(value))
    }

    /// Records a file written by someone else, such as a nested run.
    pub fn adopt(&mut self, entry: FileEntry) {
        self.files.insert(entry.path.clone(), entry);
    }

    /// Recorded files plus the manifest itself, sorted by path.
    pub fn entries(&self) -> Vec<FileEntry> {
        let mut files = self.files.clone();
        files.insert(
            MANIFEST_NAME.into(),
            FileEntry { path: MANIFEST_NAME.into(), diagnostic: "manifest".into(), bytes: None, sha256: None },
        );
        files.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Nothing to measure (zero data); counted as a pass.
    Degenerate,
    Fail,
    Error,
}

impl Status {
    pub fn is_ok(self) -> bool {
        matches!(self, Status::Pass | Status::Degenerate)
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub status: Status,
    pub diagnostics: Vec<DiagnosticSummary>,
    pub files: Vec<FileEntry>,
    /// Wall-clock seconds per stage; only recorded on request so that
    /// repeated runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.status.is_ok()
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Artifact { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        atomic_write(&dir.join(MANIFEST_NAME), &json_bytes(self))
    }
}

pub fn tool_version() -> String {
    format!("hardylab {}", env!("CARGO_PKG_VERSION"))
}

/// Header `HLSNAP01`, then `u32` dim, points, components, dtype tag, then
/// `f64` half-width and time, then row-major `(re, im)` pairs; all little
/// endian.
pub fn snapshot_bytes(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 16 * f.values().len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    for v in [g.dim() as u32, g.points() as u32, g.components() as u32, DTYPE_COMPLEX128] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&f.time().to_le_bytes());
    for z in f.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn read_snapshot(path: &Path) -> CliResult<Field> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let bad = |msg: &str| CliError::Artifact { path: path.to_path_buf(), msg: msg.to_string() };
    if bytes.len() < SNAPSHOT_HEADER_BYTES || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().expect("4 bytes")) as usize;
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
    let (dim, points, comps, dtype) = (u32_at(0), u32_at(1), u32_at(2), u32_at(3));
    if dtype as u32 != DTYPE_COMPLEX128 {
        return Err(bad("unsupported dtype tag"));
    }
    let half_width = f64_at(24);
    let time = f64_at(32);
    let grid = Grid::new(dim, points, half_width, comps).map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[SNAPSHOT_HEADER_BYTES..];
    if body.len() != 16 * grid.len() {
        return Err(bad("payload length does not match the header"));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Field::new(&grid, values, time).map_err(|e| bad(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-10, 3.0e-300, 1.7976931348623157e308, 123456.789, 5e-324, -1e20] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-10), "1e-10");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_uses_unix_line_endings() {
        let b = csv_bytes(&["t", "x"], &[vec!["0".into(), "a,b".into()]]);
        assert_eq!(String::from_utf8(b).unwrap(), "t,x\n0,\"a,b\"\n");
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 8, 3.0, 2).unwrap();
        let f = Field::from_fn(&grid, |x, c| Complex64::new(x[0] + c as f64, x[1] * 0.5)).unwrap().with_time(0.75);
        let path = dir.path().join("u.bin");
        atomic_write(&path, &snapshot_bytes(&f)).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, SNAPSHOT_HEADER_BYTES + 16 * grid.len());
    }

    #[test]
    fn tree_lists_every_write() {
        let dir = tempfile::tempdir().unwrap();
        let mut tree = OutputTree::create(&dir.path().join("nested/run")).unwrap();
        tree.write_json("a.json", "x", &vec![1.0, 2.0]).unwrap();
        tree.write_csv("sub/b.csv", "y", &["c"], &[vec!["1".into()]]).unwrap();
        let names: Vec<String> = tree.entries().into_iter().map(|e| e.path).collect();
        assert_eq!(names, ["a.json", "manifest.json", "sub/b.csv"]);
        let leftovers = fs::read_dir(tree.root())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp"));
        assert_eq!(leftovers.count(), 0);
    }
}
