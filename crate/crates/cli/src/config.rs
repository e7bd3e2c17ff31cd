use std::path::Path;

use serde::{Deserialize, Serialize};

use newton_odometer_core::{q, ExactScalar};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Step budget for `classify`; `None` uses the model-size default.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_retries")]
    pub rejection_retries: usize,
    #[serde(default = "default_exhaustion")]
    pub exhaustion_limit: u64,
}

fn default_retries() -> usize {
    256
}

fn default_exhaustion() -> u64 {
    1 << 24
}

impl Default for Budgets {
    fn default() -> Self {
        Self { max_steps: None, rejection_retries: default_retries(), exhaustion_limit: default_exhaustion() }
    }
}

/// Affine piece `slope·(x − root)` on all of `[−M, M]`, for `contraction`
/// runs without a model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub slope: ExactScalar,
    pub root: ExactScalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the input document's `M` when both are given.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<ExactScalar>,
    #[serde(default = "default_epsilon")]
    pub epsilon: ExactScalar,
    #[serde(default = "default_epsilon")]
    pub delta: ExactScalar,
    #[serde(rename = "Delta", default = "default_big_delta")]
    pub big_delta: ExactScalar,
    #[serde(default = "default_t")]
    pub t: ExactScalar,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// One entry per level; the level-1 entry is ignored and may be `null`.
    #[serde(default)]
    pub multipliers: Vec<Option<usize>>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piece: Option<PieceSpec>,
}

fn default_epsilon() -> ExactScalar {
    q(1, 10)
}

fn default_big_delta() -> ExactScalar {
    q(1, 100)
}

fn default_t() -> ExactScalar {
    q(1, 100)
}

fn default_depth() -> usize {
    1
}

fn default_grid() -> usize {
    101
}

fn default_trials() -> usize {
    1000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, HarnessError> {
        let cfg: Self = match path {
            None => Self::default(),
            Some(p) => {
                let text = read_text(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Input(format!("config {}: {e}", p.display())))?
            }
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), HarnessError> {
        for (name, v) in [("epsilon", &self.epsilon), ("delta", &self.delta), ("Delta", &self.big_delta)] {
            if !v.is_positive() {
                return Err(HarnessError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(m) = &self.half_width {
            if !m.is_positive() {
                return Err(HarnessError::Input(format!("M must be positive, got {m}")));
            }
            self.check_t(m)?;
        }
        if self.depth == 0 || self.grid_points == 0 {
            return Err(HarnessError::Input("depth and grid_points must be positive".into()));
        }
        if self.budgets.rejection_retries == 0 || self.budgets.exhaustion_limit == 0 {
            return Err(HarnessError::Input("budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn check_t(&self, m: &ExactScalar) -> Result<(), HarnessError> {
        if self.t <= -m || &self.t >= m {
            return Err(HarnessError::Input(format!("t = {} is not inside (-{m}, {m})", self.t)));
        }
        Ok(())
    }

    /// Reconciles the config's `M` with the one carried by a document.
    pub fn resolve_half_width(&self, from_document: &ExactScalar) -> Result<ExactScalar, HarnessError> {
        match &self.half_width {
            Some(m) if m != from_document => {
                Err(HarnessError::Input(format!("config M = {m} but the document has M = {from_document}")))
            }
            _ => {
                self.check_t(from_document)?;
                Ok(from_document.clone())
            }
        }
    }

    /// Multipliers for levels `2..=depth`.
    pub fn level_multipliers(&self) -> Result<Vec<usize>, HarnessError> {
        if self.multipliers.len() != self.depth {
            return Err(HarnessError::Input(format!(
                "multipliers has {} entries for depth {}",
                self.multipliers.len(),
                self.depth
            )));
        }
        self.multipliers[1..]
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Some(v) if *v >= 2 => Ok(*v),
                other => Err(HarnessError::Input(format!("multiplier for level {} must be at least 2, got {other:?}", i + 2))),
            })
            .collect()
    }
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}
