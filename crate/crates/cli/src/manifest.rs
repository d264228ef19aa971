//! Provenance: every command writes `<command>.manifest.json` next to its
//! outputs, holding the arguments, the effective configuration and SHA-256
//! hashes of every file read and written.

use std::fs;
use std::path::{Path, PathBuf};

use ctclass_core::config::RunConfig;
use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::cli::Command;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Effective configuration after command-line overrides.
    pub config: String,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileHash>,
    pub results: Map<String, Value>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Warn when `path` is listed as an output of a manifest in its own
/// directory with a different hash.
fn check_upstream(path: &Path, sha: &str) {
    let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
        return;
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let Ok(entries) = fs::read_dir(&dir) else {
        return;
    };
    let mut manifests: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".manifest.json")))
        .collect();
    manifests.sort();
    for m in manifests {
        let Ok(text) = fs::read_to_string(&m) else { continue };
        let Ok(v) = serde_json::from_str::<Value>(&text) else { continue };
        let Some(outs) = v.get("outputs").and_then(Value::as_array) else { continue };
        for o in outs {
            if o.get("path").and_then(Value::as_str) == Some(name) {
                if let Some(recorded) = o.get("sha256").and_then(Value::as_str) {
                    if recorded != sha {
                        warn!(
                            "{} does not match the hash recorded in {}; it was changed after it was written",
                            path.display(),
                            m.display()
                        );
                    }
                }
            }
        }
    }
}

/// State shared by one command run: configuration, output directory and
/// the provenance being collected.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    results: Map<String, Value>,
    /// Inputs recorded by the manifest being re-run.
    expected: Option<Vec<FileHash>>,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: PathBuf, expected: Option<Vec<FileHash>>) -> CliResult<Ctx> {
        if !out.is_dir() {
            return Err(CliError::io(format!("output directory {} does not exist", out.display())));
        }
        Ok(Ctx {
            cfg,
            out,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Map::new(),
            expected,
        })
    }

    /// `name` inside the output directory.
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn read_input(&mut self, role: &str, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::io(format!("cannot read {role} {}: {e}", path.display())))?;
        let sha = sha256_hex(&bytes);
        check_upstream(path, &sha);
        if let Some(exp) = &self.expected {
            match exp.iter().find(|f| f.role == role) {
                Some(f) if f.sha256 != sha => warn!(
                    "{role} {} differs from the manifest's {} (hash mismatch)",
                    path.display(),
                    f.path
                ),
                None => warn!("{role} {} is not recorded in the manifest", path.display()),
                _ => {}
            }
        }
        self.inputs.push(FileHash {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha,
        });
        Ok(bytes)
    }

    pub fn write_output(&mut self, role: &str, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.out_path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(FileHash {
            role: role.to_string(),
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Serialise with `f` and write to `name`.
    pub fn write_with<F>(&mut self, role: &str, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> ctclass_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_output(role, name, &buf)
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.results.insert(key.to_string(), v);
    }

    pub fn finish(self, command: &Command) -> CliResult<PathBuf> {
        let config = self.cfg.to_toml()?;
        let m = Manifest {
            tool: "ctclass".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            results: self.results,
        };
        let path = self.out.join(Manifest::file_name(command.name()));
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Numeric(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
