//! Run manifests: enough to re-run a command and check its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Fully resolved tracker configuration as TOML, when the command uses one.
    /// Replays use it instead of re-reading config files and the environment.
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seconds: f64,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Where a command's manifest goes: `explicit` if given, else next to the
/// primary output file, else nowhere.
pub fn location(explicit: Option<&Path>, output: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        output.map(|o| {
            let mut name = o.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        })
    })
}
