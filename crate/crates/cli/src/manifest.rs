//! Run manifests: everything needed to re-run a command bit-identically.

use std::fs;
use std::path::Path;

use anyhow::Context;
use chrono::{DateTime, Utc};
use fxvg_core::model::SubordinatorParams;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Price,
    Converge,
    Gof,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: CommandKind,
    pub created_at: DateTime<Utc>,
    /// Fully resolved configuration (defaults, file and flags merged).
    pub config: RunConfig,
    pub subordinator: SubordinatorParams,
    /// Output file names relative to the output directory.
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: CommandKind, config: RunConfig, subordinator: SubordinatorParams) -> Self {
        Self {
            tool: "fxvg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            created_at: Utc::now(),
            config,
            subordinator,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::ConfigError::new(format!("manifest {}: {e}", path.display())).into())
    }
}
