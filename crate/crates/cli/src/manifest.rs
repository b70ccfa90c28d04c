//! Config files and run manifests.
//!
//! A manifest is a config file: `kgwalk <cmd> --config out/manifest.toml`
//! re-runs the command with exactly the recorded settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
    /// sha256 of every input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

/// Loads a command config from a TOML file. Both bare configs and manifests
/// (with a `[config]` table) are accepted.
pub fn load_config<C: DeserializeOwned + Default>(
    path: Option<&Path>,
    command: &str,
) -> CliResult<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    if let Some(cmd) = doc.get("command").and_then(|v| v.as_str()) {
        if cmd != command {
            return Err(CliError::invalid(format!(
                "{} was written by `{cmd}`, not `{command}`",
                path.display()
            )));
        }
    }
    let table = match doc.remove("config") {
        Some(toml::Value::Table(t)) => t,
        _ => doc,
    };
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    inputs: &[&Path],
    outputs: &[&str],
) -> CliResult<PathBuf> {
    let mut input_sums = BTreeMap::new();
    for p in inputs {
        input_sums.insert(p.display().to_string(), sha256_file(p)?);
    }
    let manifest = Manifest {
        tool: "kgwalk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config,
        inputs: input_sums,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| CliError::invalid(format!("cannot serialize manifest: {e}")))?;
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
