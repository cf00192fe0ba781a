//! Run manifests: a JSON record of what a command did, the verdicts it reached and a SHA-256
//! list of every file it emitted.

use crate::CliError;
use helix_core::studies::{FitRecord, Verdict};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// The JSON manifest written at the end of every command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Version of the `helix` build that produced the run.
    pub version: String,
    /// Resolved configuration (identical to the emitted `config.toml`).
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub threads: usize,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    pub fits: Vec<FitRecord>,
    /// Termination of a nonlinear run, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<serde_json::Value>,
    /// Main CSV series, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    /// Command-specific summary values.
    pub results: serde_json::Value,
    pub caveats: Vec<String>,
    /// Error message when the command failed before producing its verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileHash>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, config_text: &str) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            config_sha256: sha256_hex(config_text.as_bytes()),
            threads: helix_core::par::current_threads(),
            passed: false,
            verdicts: Vec::new(),
            fits: Vec::new(),
            termination: None,
            series: None,
            results: serde_json::Value::Null,
            caveats: Vec::new(),
            error: None,
            files: Vec::new(),
        }
    }

    /// Sets `passed` from the verdicts and fits (and the absence of an error).
    pub fn finalize_verdict(&mut self) -> bool {
        self.passed = self.error.is_none() && self.verdicts.iter().all(|v| v.passed) && self.fits.iter().all(|f| f.passed);
        self.passed
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes a file on disk.
pub fn hash_file(path: &Path) -> std::io::Result<FileHash> {
    let bytes = fs::read(path)?;
    Ok(FileHash {
        path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// An output directory owned by one command invocation; records every file written to it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` atomically through `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        body(&mut buf)?;
        write_atomic(&self.dir.join(name), &buf)?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    /// Writes a file produced by a path-based writer (e.g. HLXF snapshots), atomically.
    pub fn write_with_path<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&Path) -> Result<(), CliError>,
    {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        body(&tmp)?;
        fs::rename(&tmp, self.dir.join(name))?;
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    /// Hashes every emitted file into the manifest and writes it atomically.
    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest, CliError> {
        manifest.files = self.written.iter().map(|n| hash_file(&self.dir.join(n))).collect::<std::io::Result<_>>()?;
        manifest.finalize_verdict();
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Run(format!("manifest: {e}")))?;
        write_atomic(&self.dir.join(MANIFEST_NAME), &json)?;
        Ok(manifest)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Outcome of re-checking a manifest against the files on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checked: usize,
    /// `(path, reason)` for every missing or altered file.
    pub mismatches: Vec<(String, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-hashes the files listed in `dir/manifest.json`. A missing or unreadable manifest, or one
/// written by a different command, is a usage error.
pub fn verify(dir: &Path, command: &str) -> Result<VerifyReport, CliError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read(&path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_slice(&text).map_err(|e| CliError::Usage(format!("malformed manifest {}: {e}", path.display())))?;
    if m.command != command {
        return Err(CliError::Usage(format!("manifest in {} belongs to `{}`, not `{command}`", dir.display(), m.command)));
    }
    let mut mismatches = Vec::new();
    for f in &m.files {
        match hash_file(&dir.join(&f.path)) {
            Err(e) => mismatches.push((f.path.clone(), format!("unreadable: {e}"))),
            Ok(h) if h.sha256 != f.sha256 || h.bytes != f.bytes => mismatches.push((f.path.clone(), "hash mismatch".into())),
            Ok(_) => {}
        }
    }
    Ok(VerifyReport { checked: m.files.len(), mismatches })
}
