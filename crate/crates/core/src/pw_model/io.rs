//! JSON model documents with rationals stored as `"p/q"` strings.

use serde::{Deserialize, Serialize};

use super::{AffinePiece, GapSpec, ModelError, PiecewiseModel};
use crate::exact::ExactScalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "M")]
    pub half_width: ExactScalar,
    pub pieces: Vec<AffinePiece>,
    pub gaps: Vec<GapSpec>,
}

impl From<&PiecewiseModel> for ModelFile {
    fn from(model: &PiecewiseModel) -> Self {
        Self {
            half_width: model.half_width().clone(),
            pieces: model.pieces().to_vec(),
            gaps: model.gaps().iter().map(|g| g.spec()).collect(),
        }
    }
}

impl TryFrom<ModelFile> for PiecewiseModel {
    type Error = ModelError;

    fn try_from(file: ModelFile) -> Result<Self, ModelError> {
        for w in file.pieces.windows(2) {
            if w[0].lo > w[1].lo {
                return Err(ModelError::Parse("pieces must be listed left to right".into()));
            }
        }
        PiecewiseModel::new(file.half_width, file.pieces, file.gaps)
    }
}

pub fn model_to_json(model: &PiecewiseModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

/// Parses and fully validates a model document.
pub fn model_from_json(text: &str) -> Result<PiecewiseModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    PiecewiseModel::try_from(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_cycle_model;

    #[test]
    fn round_trip_is_exact() {
        let m = two_cycle_model();
        let text = model_to_json(&m);
        assert!(text.contains("\"-5/2\""));
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_json(&back), text);
    }

    #[test]
    fn loader_rejects_broken_junction() {
        let text = r#"{"M":"1/1","pieces":[{"lo":"-1/1","hi":"0/1","a":"1/1","b":"0/1"},
            {"lo":"0/1","hi":"1/1","a":"1/1","b":"1/1"}],"gaps":[]}"#;
        assert_eq!(model_from_json(text).unwrap_err().code(), "E_JUNCTION");
        assert_eq!(model_from_json("{").unwrap_err().code(), "E_PARSE");
    }
}
