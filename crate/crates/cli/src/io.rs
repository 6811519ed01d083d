//! Whole-file inputs and outputs plus the per-output run manifest.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use expanse_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;

pub const STDIO: &str = "-";

/// An input read fully into memory, with its digest for the manifest.
pub struct Input {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Input {
    pub fn read(path: &Path) -> Result<Self> {
        let name = path.to_string_lossy().into_owned();
        let bytes = if name == STDIO {
            let mut b = Vec::new();
            io::stdin().lock().read_to_end(&mut b)?;
            b
        } else {
            fs::read(path).map_err(|e| Error::invalid(format!("cannot read {name}: {e}")))?
        };
        Ok(Input { path: name, bytes })
    }

    pub fn entry(&self) -> InputEntry {
        InputEntry {
            path: self.path.clone(),
            sha256: hex(&Sha256::digest(&self.bytes)),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub records_in: usize,
    pub records_out: usize,
    pub records_rejected: usize,
    pub inputs: Vec<InputEntry>,
}

/// Refuses to write over any of the inputs.
pub fn check_distinct(out: &Path, inputs: &[&Path]) -> Result<()> {
    if out.as_os_str() == STDIO {
        return Ok(());
    }
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let target = canon(out);
    for i in inputs {
        if i.as_os_str() != STDIO && canon(i) == target {
            return Err(Error::invalid(format!("output {} would overwrite an input", out.display())));
        }
    }
    Ok(())
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.as_os_str() == STDIO {
        let mut out = io::stdout().lock();
        out.write_all(bytes)?;
        out.flush()?;
        return Ok(());
    }
    fs::write(path, bytes).map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

/// `<out>.manifest.json`, or nothing for standard output unless a path is given.
pub fn manifest_path(out: &Path, explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    if out.as_os_str() == STDIO {
        return None;
    }
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    Some(PathBuf::from(name))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).map_err(|e| Error::invalid(e.to_string()))?;
    bytes.push(b'\n');
    write_output(path, &bytes)
}
