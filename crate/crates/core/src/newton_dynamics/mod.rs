//! Newton-map iteration on piecewise models and exact orbit classification.

mod contraction;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contraction::{
    contraction_certificate, eta_closed_form, verify_halving, ContractionCertificate, ContractionError,
    HalvingOutcome,
};

use crate::exact::{cmp_abs, ExactScalar};
use crate::pw_model::{Fate, Location, ModelError, NiceFamily, PiecewiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UndefinedReason {
    ZeroDerivative,
    InGap,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(ExactScalar),
    Diverged { value: ExactScalar },
    Undefined(UndefinedReason),
}

/// One application of `N(g, x) = x − g(x)/g′(x)`.
///
/// On a piece the result is the piece's root. Strictly inside a gap the step is
/// left unclassified. On a bare gap endpoint the generic formula is used.
pub fn newton_step(model: &PiecewiseModel, x: &ExactScalar) -> Result<StepResult, ModelError> {
    let image = match model.locate(x)? {
        Location::Piece(i) => model.pieces()[i].newton_image(),
        Location::GapInterior(_) => return Ok(StepResult::Undefined(UndefinedReason::InGap)),
        Location::GapBoundary(_) => match newton_map(model, x)? {
            Some(v) => v,
            None => return Ok(StepResult::Undefined(UndefinedReason::ZeroDerivative)),
        },
    };
    if cmp_abs(&image, model.half_width()).is_gt() {
        Ok(StepResult::Diverged { value: image })
    } else {
        Ok(StepResult::Next(image))
    }
}

/// `x − g(x)/g′(x)` from point evaluations, `None` when `g′(x) = 0`.
pub fn newton_map(model: &PiecewiseModel, x: &ExactScalar) -> Result<Option<ExactScalar>, ModelError> {
    let v = model.eval(x)?;
    let d = model.eval_derivative(x)?;
    Ok(v.checked_div(&d).map(|r| x - &r))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TrajectoryOutcome {
    Diverges { steps: usize, exit_value: ExactScalar },
    ConvergesToRoot { root_w: ExactScalar, steps_to_land: usize },
    EventuallyPeriodic { preperiod: usize, period: usize, cycle_points: Vec<ExactScalar> },
    Undefined { reason: UndefinedReason },
}

impl TrajectoryOutcome {
    pub fn tag(&self) -> &'static str {
        match self {
            TrajectoryOutcome::Diverges { .. } => "diverge",
            TrajectoryOutcome::ConvergesToRoot { .. } => "converge",
            TrajectoryOutcome::EventuallyPeriodic { .. } => "periodic",
            TrajectoryOutcome::Undefined { reason: UndefinedReason::InGap } => "in_gap",
            TrajectoryOutcome::Undefined { .. } => "undefined",
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            TrajectoryOutcome::EventuallyPeriodic { period, .. } => Some(*period),
            _ => None,
        }
    }
}

pub fn default_max_steps(model: &PiecewiseModel) -> usize {
    4 * model.pieces().len() + 8
}

/// Follows the certified fates of `family` from `x`.
///
/// Every orbit point after the first is a member's landing point, so repeats
/// are detected by exact equality.
pub fn classify(model: &PiecewiseModel, family: &NiceFamily, x: &ExactScalar, max_steps: usize) -> TrajectoryOutcome {
    if !model.in_domain(x) || !family.contains(x) {
        return TrajectoryOutcome::Undefined { reason: UndefinedReason::InGap };
    }
    let mut orbit: Vec<ExactScalar> = vec![x.clone()];
    let mut seen: HashMap<ExactScalar, usize> = HashMap::new();
    seen.insert(x.clone(), 0);
    for step in 1..=max_steps {
        let current = orbit.last().expect("orbit is nonempty");
        let member = match family.member_containing(current) {
            Some(m) => m,
            None => return TrajectoryOutcome::Undefined { reason: UndefinedReason::InGap },
        };
        let next = match &member.fate {
            Fate::Escapes { image } => {
                return TrajectoryOutcome::Diverges { steps: step, exit_value: image.clone() };
            }
            Fate::LandsIn { point, .. } => point.clone(),
        };
        if &next == current {
            return TrajectoryOutcome::ConvergesToRoot { root_w: next, steps_to_land: step - 1 };
        }
        if let Some(&j) = seen.get(&next) {
            return TrajectoryOutcome::EventuallyPeriodic {
                preperiod: j,
                period: orbit.len() - j,
                cycle_points: orbit[j..].to_vec(),
            };
        }
        seen.insert(next.clone(), orbit.len());
        orbit.push(next);
    }
    TrajectoryOutcome::Undefined { reason: UndefinedReason::BudgetExceeded }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaLimit {
    Cycle(Vec<ExactScalar>),
    RootSingleton(ExactScalar),
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trajectory is undefined: {0:?}")]
pub struct UndefinedTrajectory(pub UndefinedReason);

/// ω-limit of the orbit of `x`; cycle points are returned sorted.
pub fn omega_limit(model: &PiecewiseModel, family: &NiceFamily, x: &ExactScalar) -> Result<OmegaLimit, UndefinedTrajectory> {
    match classify(model, family, x, default_max_steps(model)) {
        TrajectoryOutcome::EventuallyPeriodic { mut cycle_points, .. } => {
            cycle_points.sort();
            Ok(OmegaLimit::Cycle(cycle_points))
        }
        TrajectoryOutcome::ConvergesToRoot { root_w, .. } => Ok(OmegaLimit::RootSingleton(root_w)),
        TrajectoryOutcome::Diverges { .. } => Ok(OmegaLimit::Divergent),
        TrajectoryOutcome::Undefined { reason } => Err(UndefinedTrajectory(reason)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;
    use crate::fixtures::{two_cycle_model, TWO_CYCLE_MEMBERS};
    use crate::pw_model::{certify_nice, AffinePiece, Cell, GapSpec, Line};

    fn escaping_model() -> PiecewiseModel {
        let l = Line::new(q(1, 1), q(-4, 1));
        PiecewiseModel::from_cells(
            q(2, 1),
            vec![
                Cell::Gap(GapSpec { lo: q(-2, 1), hi: q(0, 1), left: l.clone(), right: l.clone() }),
                Cell::Piece(AffinePiece::on_line(q(0, 1), q(1, 1), &l)),
                Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l.clone(), right: l }),
            ],
        )
        .unwrap()
    }

    fn root_model() -> PiecewiseModel {
        let l = Line::new(q(1, 1), q(-1, 2));
        PiecewiseModel::from_cells(
            q(2, 1),
            vec![
                Cell::Gap(GapSpec { lo: q(-2, 1), hi: q(0, 1), left: l.clone(), right: l.clone() }),
                Cell::Piece(AffinePiece::on_line(q(0, 1), q(1, 1), &l)),
                Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l.clone(), right: l }),
            ],
        )
        .unwrap()
    }

    #[test]
    fn step_examples() {
        let m = two_cycle_model();
        assert_eq!(newton_step(&m, &q(3, 10)).unwrap(), StepResult::Next(q(5, 2)));
        assert_eq!(newton_step(&m, &q(3, 2)).unwrap(), StepResult::Undefined(UndefinedReason::InGap));
        let e = escaping_model();
        assert_eq!(newton_step(&e, &q(1, 2)).unwrap(), StepResult::Diverged { value: q(4, 1) });
    }

    #[test]
    fn classify_examples() {
        let m = two_cycle_model();
        let fam = certify_nice(&m, &TWO_CYCLE_MEMBERS).unwrap();
        assert_eq!(
            classify(&m, &fam, &q(3, 10), 16),
            TrajectoryOutcome::EventuallyPeriodic { preperiod: 1, period: 2, cycle_points: vec![q(5, 2), q(1, 2)] }
        );
        let r = root_model();
        let fam = certify_nice(&r, &[0]).unwrap();
        assert_eq!(
            classify(&r, &fam, &q(9, 10), 16),
            TrajectoryOutcome::ConvergesToRoot { root_w: q(1, 2), steps_to_land: 1 }
        );
        assert_eq!(omega_limit(&r, &fam, &q(9, 10)).unwrap(), OmegaLimit::RootSingleton(q(1, 2)));
        let e = escaping_model();
        let fam = certify_nice(&e, &[0]).unwrap();
        assert_eq!(classify(&e, &fam, &q(1, 2), 16), TrajectoryOutcome::Diverges { steps: 1, exit_value: q(4, 1) });
        assert_eq!(omega_limit(&e, &fam, &q(1, 2)).unwrap(), OmegaLimit::Divergent);
    }

    #[test]
    fn omega_of_two_cycle() {
        let m = two_cycle_model();
        let fam = certify_nice(&m, &TWO_CYCLE_MEMBERS).unwrap();
        for x in [q(0, 1), q(1, 1), q(2, 1), q(11, 4)] {
            assert_eq!(omega_limit(&m, &fam, &x).unwrap(), OmegaLimit::Cycle(vec![q(1, 2), q(5, 2)]));
        }
    }

    #[test]
    fn outside_family_and_budget() {
        let m = two_cycle_model();
        let fam = certify_nice(&m, &TWO_CYCLE_MEMBERS).unwrap();
        assert_eq!(classify(&m, &fam, &q(3, 2), 16), TrajectoryOutcome::Undefined { reason: UndefinedReason::InGap });
        assert_eq!(
            classify(&m, &fam, &q(3, 10), 2),
            TrajectoryOutcome::Undefined { reason: UndefinedReason::BudgetExceeded }
        );
    }
}
