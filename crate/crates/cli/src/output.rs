//! File emission: CSV, JSON, legacy VTK and raw binary snapshots, and the
//! run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gflame_core::grid::ScalarField3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, KvConfig};
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Header line plus one line per row.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Node values with `x` varying fastest, then `y`, then `z`.
fn x_fastest(field: &ScalarField3) -> impl Iterator<Item = f64> + '_ {
    let n = field.grid().n();
    (0..n).flat_map(move |k| (0..n).flat_map(move |j| (0..n).map(move |i| field.get(i, j, k))))
}

/// Legacy ASCII `STRUCTURED_POINTS` dataset with one scalar array.
pub fn vtk_structured_points(field: &ScalarField3, name: &str, title: &str) -> String {
    let grid = field.grid();
    let n = grid.n();
    let h = fmt_f64(grid.h());
    let mut out = String::with_capacity(field.data().len() * 25 + 256);
    out.push_str("# vtk DataFile Version 3.0\n");
    // the title line may not contain newlines and is limited to 256 chars
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    out.push_str(&title);
    out.push('\n');
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {n} {n} {n}");
    out.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(out, "SPACING {h} {h} {h}");
    let _ = writeln!(out, "POINT_DATA {}", n * n * n);
    let _ = writeln!(out, "SCALARS {name} double 1");
    out.push_str("LOOKUP_TABLE default\n");
    for (m, v) in x_fastest(field).enumerate() {
        out.push_str(&fmt_f64(v));
        out.push(if (m + 1) % n == 0 { '\n' } else { ' ' });
    }
    out
}

/// Little-endian `f64` values, `x` fastest.
pub fn raw_le_f64(field: &ScalarField3) -> Vec<u8> {
    x_fastest(field).flat_map(f64::to_le_bytes).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub file: String,
    pub field: String,
    pub dtype: String,
    pub byte_order: String,
    pub order: String,
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub step: usize,
    pub time: f64,
}

impl RawSidecar {
    pub fn new(file: &str, field: &str, data: &ScalarField3, step: usize, time: f64) -> Self {
        let n = data.grid().n();
        let h = data.grid().h();
        Self {
            file: file.to_string(),
            field: field.to_string(),
            dtype: "float64".into(),
            byte_order: "little".into(),
            order: "x-fastest".into(),
            dims: [n; 3],
            origin: [0.0; 3],
            spacing: [h; 3],
            step,
            time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub config_hash: String,
    pub wall_time_seconds: f64,
    pub files: Vec<FileRecord>,
}

/// Output directory that records every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    /// Directories are created on first write.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        // a stale manifest would claim a completed run
        let stale = root.join(MANIFEST_NAME);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        if rel == MANIFEST_NAME {
            return Err(CliError::Usage(format!("`{MANIFEST_NAME}` is reserved")));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        let record = FileRecord {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        };
        match self.files.iter_mut().find(|f| f.path == rel) {
            Some(existing) => *existing = record,
            None => self.files.push(record),
        }
        Ok(path)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<PathBuf, CliError> {
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Usage(format!("cannot serialize {rel}: {e}")))?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    /// Write the manifest; call once, after every other file.
    pub fn finish(self, subcommand: &str, config: &KvConfig, wall_time_seconds: f64) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.entries().clone(),
            config_hash: config.hash(),
            wall_time_seconds,
            files: self.files,
        };
        std::fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        let path = self.root.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Usage(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gflame_core::grid::Grid3;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let text = csv_table(&["a", "b"], vec![vec![1.0, 2.0]]);
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn vtk_header_and_order() {
        let grid = Grid3::new(8).unwrap();
        let f = ScalarField3::from_fn(grid, |x, _, z| x + 100.0 * z);
        let text = vtk_structured_points(&f, "G", "test");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET STRUCTURED_POINTS");
        assert_eq!(lines[4], "DIMENSIONS 8 8 8");
        assert_eq!(lines[7], "POINT_DATA 512");
        assert_eq!(lines[8], "SCALARS G double 1");
        let values: Vec<f64> = lines[10..]
            .iter()
            .flat_map(|l| l.split_whitespace())
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(values.len(), 512);
        // x varies fastest
        assert_eq!(values[1], grid.coord(1));
        assert_eq!(values[64], 100.0 * grid.coord(1));
    }

    #[test]
    fn raw_matches_vtk_order() {
        let grid = Grid3::new(8).unwrap();
        let f = ScalarField3::from_fn(grid, |x, y, z| x - 2.0 * y + 3.0 * z);
        let raw = raw_le_f64(&f);
        assert_eq!(raw.len(), 512 * 8);
        let v = |m: usize| f64::from_le_bytes(raw[8 * m..8 * m + 8].try_into().unwrap());
        assert_eq!(v(1), f.get(1, 0, 0));
        assert_eq!(v(8), f.get(0, 1, 0));
        assert_eq!(v(64), f.get(0, 0, 1));
    }
}
