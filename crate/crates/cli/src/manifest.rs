use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Provenance, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one run: the resolved configuration and the digests of what it
/// read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Absolute input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn input_digests(config: &RunConfig) -> Result<BTreeMap<String, String>> {
    config
        .input_files()
        .into_iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(&p)?)))
        .collect()
}

/// Fails if a manifest being replayed was written by another command or
/// its inputs have changed since.
pub fn check_provenance(command: &str, prov: &Provenance, inputs: &BTreeMap<String, String>) -> Result<()> {
    if let Some(c) = &prov.command {
        if c != command {
            bail!("manifest was written by `{c}`, not `{command}`");
        }
    }
    for (path, digest) in &prov.inputs {
        match inputs.get(path) {
            Some(d) if d == digest => {}
            Some(_) => bail!("input {path} changed since the manifest was written"),
            None => bail!("input {path} from the manifest is not used by this configuration"),
        }
    }
    Ok(())
}

/// Output directory that remembers the digest of each file written.
pub struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV whose cells need no quoting.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Records a file written by someone else.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let name = path
            .strip_prefix(&self.dir)
            .with_context(|| format!("{} is outside the output directory", path.display()))?
            .to_string_lossy()
            .replace('\\', "/");
        let digest = sha256_file(path)?;
        self.files.insert(name, digest);
        Ok(())
    }

    pub fn finish(self, command: &str, config: &RunConfig, inputs: BTreeMap<String, String>) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs,
            outputs: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

/// Shortest round-tripping decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
