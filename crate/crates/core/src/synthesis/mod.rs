//! Constructive perturbations: nice approximations of input functions,
//! Newton-image retargeting, cycle-period multiplication and refinement towers.

mod approx;
mod input;
mod log;
mod period;
mod perturb;
mod retarget;
mod tower;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use approx::{
    build_nice_approximation, gap_radii, perturb_values, smooth_gaps, ApproximationReport, ApproximationResult,
    PerturbOptions, PiecewiseLinear,
};
pub use input::{ContinuityModulus, InputFile, InputFunction, InputSegment};
pub use log::{ConstructionLog, LogEvent};
pub use period::{multiply_cycle_period, PeriodMultiplication, PeriodParams};
pub use perturb::{perturb_piece, Perturbation};
pub use retarget::{admissible_radius, apply_windows, retarget, RetargetResult, Window, WindowOutcome};
pub use tower::{build_tower, find_cycle, RefinementTower, TowerFile, TowerLevel, TowerLevelFile, TowerOptions};

use crate::exact::ExactScalar;
use crate::pw_model::{ModelError, NiceError, NiceFamily, PiecewiseModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("invalid input function: {0}")]
    Input(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{stage}: rejection budget of {attempts} attempts exhausted; retry with a finer perturbation")]
    RejectionBudget { stage: String, attempts: usize },
    #[error("target {requested} is {distance} from the current image; admissible radius is below {max_radius}")]
    Radius { requested: ExactScalar, distance: ExactScalar, max_radius: ExactScalar },
    #[error("cannot place points in [{lo}, {hi}]: {reason}")]
    Placement { lo: ExactScalar, hi: ExactScalar, reason: String },
    #[error("post-condition {condition} failed: {detail}")]
    Validation { condition: String, detail: String },
    #[error("cannot create a cycle through t: {0}")]
    CycleCreation(String),
    #[error("level {level}: {source}")]
    Level { level: usize, source: Box<SynthesisError> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nice(#[from] NiceError),
}

impl SynthesisError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthesisError::Input(_) => "E_INPUT",
            SynthesisError::Precondition(_) => "E_PRECONDITION",
            SynthesisError::RejectionBudget { .. } => "E_REJECTION_BUDGET",
            SynthesisError::Radius { .. } => "E_RADIUS",
            SynthesisError::Placement { .. } => "E_PLACEMENT",
            SynthesisError::Validation { .. } => "E_VALIDATION",
            SynthesisError::CycleCreation(_) => "E_CYCLE_CREATION",
            SynthesisError::Level { source, .. } => source.code(),
            SynthesisError::Model(e) => e.code(),
            SynthesisError::Nice(e) => e.code(),
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        SynthesisError::Level { level, source: Box::new(self) }
    }
}

/// A family member of a cycle, by piece id and interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycleInterval {
    pub piece_id: usize,
    pub lo: ExactScalar,
    pub hi: ExactScalar,
}

impl CycleInterval {
    pub fn contains(&self, x: &ExactScalar) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interior(&self, x: &ExactScalar) -> bool {
        &self.lo < x && x < &self.hi
    }

    pub fn diameter(&self) -> ExactScalar {
        &self.hi - &self.lo
    }
}

/// `J_0, …, J_n` in cyclic order with `z_i = N(g, J_{i−1}) ∈ Int J_i`
/// (indices mod `n + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicFamilyRef {
    pub intervals: Vec<CycleInterval>,
    pub cycle_points: Vec<ExactScalar>,
}

impl CyclicFamilyRef {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_diameter(&self) -> ExactScalar {
        self.intervals.iter().map(CycleInterval::diameter).max().unwrap_or_default()
    }

    pub fn measure(&self) -> ExactScalar {
        self.intervals.iter().map(CycleInterval::diameter).sum()
    }

    /// Index of the interval containing `x`.
    pub fn position_of(&self, x: &ExactScalar) -> Option<usize> {
        self.intervals.iter().position(|i| i.contains(x))
    }

    /// Checks the cyclic landing conditions against `model` and `family`.
    pub fn check(&self, model: &PiecewiseModel, family: &NiceFamily) -> Result<(), SynthesisError> {
        let n = self.intervals.len();
        if n == 0 || self.cycle_points.len() != n {
            return Err(SynthesisError::Validation {
                condition: "cyclic".into(),
                detail: "cycle points do not match intervals".into(),
            });
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            let piece = model.piece(iv.piece_id).ok_or(NiceError::UnknownPiece(iv.piece_id))?;
            if piece.lo != iv.lo || piece.hi != iv.hi || family.member_by_piece(iv.piece_id).is_none() {
                return Err(SynthesisError::Validation {
                    condition: "cyclic".into(),
                    detail: format!("interval {i} is not a family piece"),
                });
            }
            let next = (i + 1) % n;
            let image = piece.newton_image();
            if image != self.cycle_points[next] || !self.intervals[next].contains_interior(&image) {
                return Err(SynthesisError::Validation {
                    condition: "cyclic".into(),
                    detail: format!("image of interval {i} is {image}, not interior to interval {next}"),
                });
            }
        }
        Ok(())
    }
}
