//! Audit trail of every rejection, retry and accepted choice made while
//! constructing models.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub kind: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstructionLog {
    pub events: Vec<LogEvent>,
}

impl ConstructionLog {
    pub fn push(&mut self, stage: &str, level: Option<usize>, kind: &str, detail: Value) {
        self.events.push(LogEvent { stage: stage.into(), level, kind: kind.into(), detail });
    }

    pub fn extend(&mut self, other: ConstructionLog) {
        self.events.extend(other.events);
    }

    pub fn count(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log event serializes"));
            out.push('\n');
        }
        out
    }
}
