//! The `design.json` document stored beside every exported hand.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gripgen::hand::{assemble_hand, HandConfig, HandModel};
use gripgen::space::DesignPoint;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub point: DesignPoint,
    /// Pad resolution the meshes were generated with.
    pub resolution: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
}

impl DesignFile {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        fs::write(dir.join("design.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> CliResult<DesignFile> {
        let path = dir.join("design.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed {}: {e}", path.display())))
    }

    pub fn assemble(&self) -> CliResult<HandModel> {
        let config = HandConfig { pad_resolution: self.resolution, ..Default::default() };
        assemble_hand(&self.point, &config)
            .map_err(|e| CliError::Config(format!("cannot assemble design: {e}")))
    }
}
