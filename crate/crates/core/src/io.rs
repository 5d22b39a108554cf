//! Plain-text outputs: CSV tables, JSON headers, content hashes and the
//! manifest that lists every file an experiment wrote.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! data always produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::lna::TruncatedGaussianSummary;
use crate::meanfield::MeanFieldSolution;
use crate::process::Trajectory;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Canonical JSON: object keys sorted, no whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps objects in a sorted map
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

/// Git-style content hash: SHA-256 of `"blob <len>\0"` followed by the canonical JSON.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let body = canonical_json(value)?;
    let mut bytes = format!("blob {}\0", body.len()).into_bytes();
    bytes.extend_from_slice(body.as_bytes());
    Ok(sha256_hex(&bytes))
}

/// Sparse dump `replica,time,type_index,count`: one row per recorded time and
/// occupied type, in time then type order.
pub fn trajectory_csv<'a>(trajectories: impl IntoIterator<Item = (usize, &'a Trajectory)>) -> String {
    let mut out = String::from("replica,time,type_index,count\n");
    for (replica, traj) in trajectories {
        for (t, state) in traj.times.iter().zip(&traj.states) {
            for (j, c) in state.iter() {
                let _ = writeln!(out, "{replica},{t},{j},{c}");
            }
        }
    }
    out
}

/// JSON header accompanying a trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub model: serde_json::Value,
    #[serde(rename = "N")]
    pub scale: u64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    pub replicas: usize,
    pub events: Vec<u64>,
    pub config_hash: String,
}

/// `time,type_index,density` on the solution grid, all of `{0..=M}`.
pub fn meanfield_csv(sol: &MeanFieldSolution) -> String {
    let mut out = String::from("time,type_index,density\n");
    for (t, x) in sol.grid.iter().zip(&sol.values) {
        for (j, v) in x.iter().enumerate() {
            let _ = writeln!(out, "{t},{j},{v}");
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldMeta {
    #[serde(rename = "M")]
    pub m: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cumulative mass lost through the truncation boundary, per grid time.
    pub dropped_flux: Vec<f64>,
    pub steps: usize,
    pub warnings: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
}

impl MeanFieldMeta {
    pub fn new(sol: &MeanFieldSolution, config_hash: String, seed: u64) -> Self {
        Self {
            m: sol.m,
            rel_tol: sol.tol.rel,
            abs_tol: sol.tol.abs,
            dropped_flux: sol.dropped_flux.clone(),
            steps: sol.steps,
            warnings: sol.warnings.clone(),
            config_hash,
            seed,
        }
    }
}

/// `time,i,j,cov_ij` for `i <= j`.
pub fn covariance_csv(summary: &TruncatedGaussianSummary) -> String {
    let mut out = String::from("time,i,j,cov_ij\n");
    for (t, c) in summary.grid.iter().zip(&summary.cov) {
        for i in 0..c.nrows() {
            for j in i..c.ncols() {
                let _ = writeln!(out, "{t},{i},{j},{}", c[(i, j)]);
            }
        }
    }
    out
}

/// One line of a study table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    #[serde(rename = "N")]
    pub n: u64,
    /// `None` for statistics aggregated over replicas.
    pub replica: Option<usize>,
    pub statistic: String,
    pub value: f64,
}

impl StudyRow {
    pub fn new(study: &str, n: u64, replica: Option<usize>, statistic: impl Into<String>, value: f64) -> Self {
        Self { study: study.to_owned(), n, replica, statistic: statistic.into(), value }
    }
}

/// `study,N,replica,statistic,value`; aggregate rows leave `replica` empty.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("study,N,replica,statistic,value\n");
    for r in rows {
        let replica = r.replica.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{replica},{},{}", r.study, r.n, r.statistic, r.value);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// An output directory that remembers what was written to it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self { root: root.as_ref().to_path_buf(), entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let bytes = contents.as_ref();
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, command: &str, config_hash: &str, seed: u64) -> Result<Manifest> {
        let mut files = self.entries;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { command: command.to_owned(), config_hash: config_hash.to_owned(), seed, files };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}
