//! CSV formatting and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever a column is added, removed or renamed.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Formats a number with 12 significant digits, `%g` style.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.prec$}"))
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exponent) = s.split_once('e').unwrap();
        format!("{}e{exponent}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// A CSV table assembled in memory and written in one piece.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.join(","));
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// An emitted file with its SHA-256 digest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments after the program name, without `--out`.
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub summary: serde_json::Value,
    pub version: String,
    pub csv_schema: u32,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<FileRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact into `dir` in the given order, then the manifest.
pub fn emit(dir: &Path, artifacts: &[(String, String)]) -> std::io::Result<Vec<FileRecord>> {
    fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(artifacts.len());
    for (name, content) in artifacts {
        fs::write(dir.join(name), content.as_bytes())?;
        records.push(FileRecord { name: name.clone(), sha256: sha256_hex(content.as_bytes()), bytes: content.len() });
    }
    Ok(records)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> std::io::Result<PathBuf> {
    let path = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> std::io::Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
