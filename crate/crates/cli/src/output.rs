use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;

pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, HarnessError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, HarnessError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write_text(name, &text)
    }
}

/// Wraps a report with the config and seed that produced it.
pub fn with_provenance<T: Serialize>(cfg: &ExperimentConfig, command: &str, report: &T) -> Value {
    json!({
        "command": command,
        "config": cfg,
        "seed": cfg.seed,
        "report": report,
    })
}
