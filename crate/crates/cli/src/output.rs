//! Output directory handling: CSV tables, the versioned JSON summary and the
//! run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rte_kernel_lab::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Version of the `summary.json` and `manifest.json` layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    s
}

pub struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file written by library code.
    pub fn record(&mut self, name: &str) {
        self.files.push(self.path(name));
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        self.record(name);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    pub fn write_summary(&mut self, command: &str, body: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
        obj.insert("command".into(), command.into());
        if let Value::Object(m) = body {
            obj.extend(m);
        } else {
            obj.insert("result".into(), body);
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| Error::Numerical(e.to_string()))?;
        self.write_text("summary.json", &(text + "\n"))
    }

    /// Writes `manifest.json` listing every artifact with its digest.
    pub fn finish(self, meta: ManifestMeta<'_>) -> Result<()> {
        let mut outputs = Vec::new();
        for f in &self.files {
            let bytes = fs::read(f)?;
            outputs.push(OutputEntry {
                file: f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                bytes: bytes.len(),
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: meta.command,
            preset: meta.preset,
            config_file: meta.config_file.map(|p| p.display().to_string()),
            config_sha256: meta.config_sha256,
            overrides: meta.overrides,
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: rte_kernel_lab::VERSION,
            threads: meta.threads,
            wall_time_s: meta.wall_time_s,
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

pub struct ManifestMeta<'a> {
    pub command: &'a str,
    pub preset: Option<&'a str>,
    pub config_file: Option<&'a Path>,
    pub config_sha256: String,
    pub overrides: Value,
    pub threads: usize,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    preset: Option<&'a str>,
    config_file: Option<String>,
    config_sha256: String,
    overrides: Value,
    tool_version: &'a str,
    library_version: &'a str,
    threads: usize,
    wall_time_s: f64,
    outputs: Vec<OutputEntry>,
}

/// Shortest round-trip decimal form; stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
