//! Run configuration: a single JSON document snapshotted into every run
//! directory, with dotted-path `--set key=value` overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gripgen::grasp::{ClosingConfig, WrenchTestSpec};
use gripgen::space::{build_power_grasp_space, DesignSpace};
use gripgen::tools::{builtin_tools, ToolModel};

use crate::error::{config_err, CliError, CliResult};

pub const BUILTIN_SPACE: &str = "builtin:power_grasp_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `builtin:power_grasp_v1` or a path to a space JSON file.
    pub space: String,
    /// Builtin tool names the hand is scored against.
    pub tools: Vec<String>,
    /// Master seed; every other stream is derived from it.
    pub seed: u64,
    /// Outer (hand) trial budget.
    pub budget: usize,
    /// Trials proposed per batch (constant-liar within a batch).
    pub batch: usize,
    /// Inner grasp-optimization budget per hand/tool pair.
    pub inner_budget: usize,
    /// K best grasps per tool entering the hand score.
    pub k_best: usize,
    /// Palm pad grid resolution.
    pub resolution: usize,
    /// How many top designs to export under `designs/`.
    pub top_designs: usize,
    pub wrench: WrenchTestSpec,
    pub closing: ClosingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            space: BUILTIN_SPACE.to_string(),
            tools: vec!["hammer".into(), "spoon".into(), "knife".into()],
            seed: 0,
            budget: 200,
            batch: 4,
            inner_budget: 60,
            k_best: 3,
            resolution: 16,
            top_designs: 3,
            wrench: WrenchTestSpec::default(),
            closing: ClosingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.budget < 1 || self.batch < 1 || self.inner_budget < 1 {
            return config_err("budgets and batch size must be at least 1");
        }
        if self.k_best < 1 || self.k_best > self.inner_budget {
            return config_err("k_best must be in 1..=inner_budget");
        }
        if self.tools.is_empty() {
            return config_err("at least one tool required");
        }
        if self.resolution < 2 {
            return config_err("pad resolution must be at least 2");
        }
        self.wrench.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))
    }

    /// Applies one `key=value` override; keys use dotted paths
    /// (e.g. `closing.mu=0.7`).
    pub fn apply_set(&mut self, spec: &str) -> CliResult<()> {
        let Some((key, raw)) = spec.split_once('=') else {
            return config_err(format!("--set expects key=value, got {spec:?}"));
        };
        let mut doc = serde_json::to_value(&*self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let mut cursor = &mut doc;
        for part in key.split('.') {
            cursor = match cursor.get_mut(part) {
                Some(v) => v,
                None => return config_err(format!("unknown config key {key:?}")),
            };
        }
        // Parse the value as JSON when possible, else treat it as a string.
        *cursor = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        *self = serde_json::from_value(doc)
            .map_err(|e| CliError::Config(format!("bad value for {key:?}: {e}")))?;
        Ok(())
    }

    pub fn resolve_space(&self) -> CliResult<DesignSpace> {
        load_space(&self.space)
    }

    pub fn resolve_tools(&self) -> CliResult<Vec<ToolModel>> {
        self.tools.iter().map(|n| lookup_tool(n)).collect()
    }
}

pub fn load_space(spec: &str) -> CliResult<DesignSpace> {
    if spec == BUILTIN_SPACE {
        return Ok(build_power_grasp_space());
    }
    let path = Path::new(spec);
    if !path.exists() {
        return config_err(format!("space file {spec:?} does not exist"));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read space {spec:?}: {e}")))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed space {spec:?}: {e}")))?;
    DesignSpace::from_json(&doc).map_err(|e| CliError::Config(e.to_string()))
}

pub fn lookup_tool(name: &str) -> CliResult<ToolModel> {
    builtin_tools()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| {
            let known: Vec<String> = builtin_tools().into_iter().map(|t| t.name).collect();
            CliError::Config(format!("unknown tool {name:?}; available: {}", known.join(", ")))
        })
}
