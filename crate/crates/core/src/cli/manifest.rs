use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Run parameters, written to every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Model configuration the run descends from, when known.
    pub config: Option<PathBuf>,
    /// Fit file or other primary input.
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub count: Option<usize>,
    pub kind: Option<String>,
    pub out: PathBuf,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, out: &Path, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: None,
            input: None,
            seed,
            count: None,
            kind: None,
            out: out.to_path_buf(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}
