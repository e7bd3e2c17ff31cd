use serde_json::{json, Value};
use thiserror::Error;

use newton_odometer_core::synthesis::SynthesisError;

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("input error: {0}")]
    Input(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("construction error [{code}]: {message}")]
    Construction { code: &'static str, message: String, level: Option<usize> },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Input(_) | HarnessError::Io { .. } => 2,
            HarnessError::Validation(_) => 3,
            HarnessError::Construction { .. } => 4,
            HarnessError::Verification(_) => 5,
        }
    }

    pub fn diagnostic(&self) -> Value {
        let kind = match self {
            HarnessError::Input(_) | HarnessError::Io { .. } => "input",
            HarnessError::Validation(_) => "validation",
            HarnessError::Construction { .. } => "construction",
            HarnessError::Verification(_) => "verification",
        };
        let mut v = json!({ "error": kind, "exit_code": self.exit_code(), "message": self.to_string() });
        if let HarnessError::Construction { code, level, .. } = self {
            v["code"] = json!(code);
            v["level"] = json!(level);
        }
        v
    }
}

impl From<SynthesisError> for HarnessError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Input(msg) => HarnessError::Input(msg),
            SynthesisError::Validation { .. } => HarnessError::Validation(e.to_string()),
            other => {
                let level = match &other {
                    SynthesisError::Level { level, .. } => Some(*level),
                    _ => None,
                };
                HarnessError::Construction { code: other.code(), message: other.to_string(), level }
            }
        }
    }
}
