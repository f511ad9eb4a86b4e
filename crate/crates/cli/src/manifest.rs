use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DataSource, RunConfig};
use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub data: Option<u64>,
    pub train: u64,
    pub bif: u64,
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Record of one command run. Contains nothing that depends on the clock or
/// on where the output directory lives.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub artifacts: Vec<Artifact>,
}

pub fn manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("manifest_{command}.json"))
}

/// Creates the output directory; fails if this command already ran there.
pub fn prepare(out: &Path, command: &str, force: bool) -> Result<(), CliError> {
    let path = manifest_path(out, command);
    if path.exists() && !force {
        return Err(CliError::Run(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    fs::create_dir_all(out)?;
    Ok(())
}

/// Writes an artifact and returns its manifest entry.
pub fn write_artifact(out: &Path, name: &str, bytes: &[u8]) -> Result<Artifact, CliError> {
    fs::write(out.join(name), bytes)?;
    Ok(Artifact {
        path: name.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

/// Manifest entry for an artifact already on disk.
pub fn existing_artifact(out: &Path, name: &str) -> Result<Artifact, CliError> {
    let bytes = fs::read(out.join(name))?;
    Ok(Artifact {
        path: name.into(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn finish(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    artifacts: Vec<Artifact>,
) -> Result<(), CliError> {
    let data = match &cfg.data {
        DataSource::Syn(spec) => Some(spec.seed),
        _ => None,
    };
    let manifest = Manifest {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        seeds: Seeds {
            data,
            train: cfg.classifier.train.seed,
            bif: cfg.bif.seed,
        },
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(manifest_path(out, command), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_second_run_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        prepare(&out, "gen", false).unwrap();
        let cfg =
            RunConfig::parse(r#"{"data":{"source":"syn","id":"syn1","n":10,"seed":1}}"#).unwrap();
        let a = write_artifact(&out, "x.txt", b"abc").unwrap();
        assert_eq!(
            a.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        finish(&out, "gen", &cfg, vec![a]).unwrap();
        assert!(prepare(&out, "gen", false).is_err());
        prepare(&out, "gen", true).unwrap();
        prepare(&out, "train", false).unwrap();
    }
}
