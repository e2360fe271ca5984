//! Run configuration: command-line flags layered over an optional TOML file,
//! and the digest that every output file records.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::{DesignArgs, LogicalArgs, ReconstructArgs, SimulateArgs};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub design: DesignArgs,
    #[serde(default)]
    pub simulate: SimulateArgs,
    #[serde(default)]
    pub reconstruct: ReconstructArgs,
    #[serde(default)]
    pub logical: LogicalArgs,
}

impl ConfigFile {
    /// Paths in the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ConfigFile = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.out);
        rebase(&mut cfg.simulate.plan);
        rebase(&mut cfg.simulate.channel);
        rebase(&mut cfg.simulate.easy_channel);
        rebase(&mut cfg.reconstruct.data);
        rebase(&mut cfg.logical.marginals);
        Ok(cfg)
    }
}

/// Fill every unset field of `$a` from `$b`.
macro_rules! layer {
    ($a:expr, $b:expr; $($f:ident),+) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.take(); } )+
    };
}
pub(crate) use layer;

/// Canonical `key=value` record of the settings a command ran with.
#[derive(Debug, Default)]
pub struct Fingerprint {
    lines: Vec<String>,
}

impl Fingerprint {
    pub fn new(command: &str) -> Self {
        Fingerprint {
            lines: vec![format!("command={command}")],
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}={value}"));
    }

    /// Records the content digest of an input rather than its location.
    pub fn file(&mut self, key: &str, bytes: &[u8]) -> String {
        let d = sha256(bytes);
        self.set(key, &d);
        d
    }

    pub fn hash(&self) -> String {
        let mut lines = self.lines.clone();
        lines.sort();
        sha256(lines.join("\n").as_bytes())
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Read an input file, keeping the bytes for checksumming.
pub fn read_input(path: &Path) -> Result<(String, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((text, bytes))
}

pub fn write_output(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
