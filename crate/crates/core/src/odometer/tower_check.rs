//! Finite-depth check that a refinement tower realizes the odometer on its
//! α-sequence: cardinalities, nesting, cyclic permutation and diameter decay.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{m_alpha_profile, AlphaSequence, PrimeProfile};
use crate::exact::ExactScalar;
use crate::newton_dynamics::{classify, default_max_steps, newton_step, StepResult, TrajectoryOutcome};
use crate::synthesis::RefinementTower;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum TowerCheckFailure {
    Alpha { detail: String },
    Cardinality { level: usize, declared_period: usize, intervals: usize, alpha_product: String },
    Refinement { level: usize, interval: usize, lo: ExactScalar, hi: ExactScalar, detail: String },
    Cyclic { level: usize, interval: usize, detail: String },
    Diameter { level: usize, detail: String },
}

impl TowerCheckFailure {
    pub fn level(&self) -> Option<usize> {
        match self {
            TowerCheckFailure::Alpha { .. } => None,
            TowerCheckFailure::Cardinality { level, .. }
            | TowerCheckFailure::Refinement { level, .. }
            | TowerCheckFailure::Cyclic { level, .. }
            | TowerCheckFailure::Diameter { level, .. } => Some(*level),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TowerCheckFailure::Alpha { .. } => "alpha",
            TowerCheckFailure::Cardinality { .. } => "cardinality",
            TowerCheckFailure::Refinement { .. } => "refinement",
            TowerCheckFailure::Cyclic { .. } => "cyclic",
            TowerCheckFailure::Diameter { .. } => "diameter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerReport {
    pub passed: bool,
    pub levels: usize,
    pub alpha: Vec<u64>,
    pub periods: Vec<usize>,
    pub max_diameters: Vec<ExactScalar>,
    pub failures: Vec<TowerCheckFailure>,
    pub profile: PrimeProfile,
    /// Primes up to the bound dividing the product of α.
    pub primes_covered: Vec<u64>,
    pub primes_missing: Vec<u64>,
}

/// Levels are numbered from 1.
pub fn verify_tower(tower: &RefinementTower, primes_up_to: u64) -> TowerReport {
    let mut failures = Vec::new();
    let alpha = match AlphaSequence::new(tower.alpha.clone()) {
        Ok(a) => Some(a),
        Err(e) => {
            failures.push(TowerCheckFailure::Alpha { detail: e.to_string() });
            None
        }
    };
    if tower.alpha.len() != tower.levels.len() {
        failures.push(TowerCheckFailure::Alpha {
            detail: format!("{} entries for {} levels", tower.alpha.len(), tower.levels.len()),
        });
    }

    let mut product = BigUint::from(1u32);
    for (idx, level) in tower.levels.iter().enumerate() {
        let k = idx + 1;
        if let Some(&a) = tower.alpha.get(idx) {
            product *= a;
        }
        let cycle = &level.cycle;
        let n = cycle.intervals.len();

        if level.period != n || BigUint::from(n) != product || cycle.cycle_points.len() != n {
            failures.push(TowerCheckFailure::Cardinality {
                level: k,
                declared_period: level.period,
                intervals: n,
                alpha_product: product.to_string(),
            });
        }

        for (i, iv) in cycle.intervals.iter().enumerate() {
            let point = match cycle.cycle_points.get(i) {
                Some(p) => p,
                None => break,
            };
            let on_piece = level
                .model
                .piece(iv.piece_id)
                .is_some_and(|p| p.lo == iv.lo && p.hi == iv.hi && level.family.member_by_piece(iv.piece_id).is_some());
            let next = &cycle.cycle_points[(i + 1) % n];
            let detail = if !on_piece {
                Some("interval is not a family piece of the level model".to_string())
            } else if !iv.contains_interior(point) {
                Some(format!("representative {point} is not interior"))
            } else {
                match newton_step(&level.model, point) {
                    Ok(StepResult::Next(y)) if &y == next && cycle.intervals[(i + 1) % n].contains_interior(&y) => None,
                    Ok(other) => Some(format!("Newton image of {point} is {other:?}, expected {next}")),
                    Err(e) => Some(e.to_string()),
                }
            };
            if let Some(detail) = detail {
                failures.push(TowerCheckFailure::Cyclic { level: k, interval: i, detail });
                break;
            }
        }
        if let Some(x) = cycle.cycle_points.first() {
            match classify(&level.model, &level.family, x, default_max_steps(&level.model)) {
                TrajectoryOutcome::EventuallyPeriodic { period, .. } if period == level.period => {}
                other => failures.push(TowerCheckFailure::Cyclic {
                    level: k,
                    interval: 0,
                    detail: format!("classified as {other:?}, declared period {}", level.period),
                }),
            }
        }

        let actual = cycle.max_diameter();
        if actual != level.max_diameter {
            failures.push(TowerCheckFailure::Diameter {
                level: k,
                detail: format!("declared {} but intervals reach {actual}", level.max_diameter),
            });
        } else if actual > level.diameter_bound {
            failures.push(TowerCheckFailure::Diameter {
                level: k,
                detail: format!("{actual} exceeds the bound {}", level.diameter_bound),
            });
        }
        if idx > 0 {
            let prev = &tower.levels[idx - 1];
            if actual >= prev.cycle.max_diameter() {
                failures.push(TowerCheckFailure::Diameter {
                    level: k,
                    detail: format!("{actual} does not decrease from {}", prev.cycle.max_diameter()),
                });
            }
            let mut children = vec![0u64; prev.cycle.intervals.len()];
            for (i, iv) in cycle.intervals.iter().enumerate() {
                match prev.cycle.intervals.iter().position(|p| p.lo <= iv.lo && iv.hi <= p.hi) {
                    Some(parent) => children[parent] += 1,
                    None => failures.push(TowerCheckFailure::Refinement {
                        level: k,
                        interval: i,
                        lo: iv.lo.clone(),
                        hi: iv.hi.clone(),
                        detail: "not contained in any interval of the previous level".into(),
                    }),
                }
            }
            let expected = tower.alpha.get(idx).copied().unwrap_or(0);
            if let Some(parent) = children.iter().position(|&c| c != expected) {
                let p = &prev.cycle.intervals[parent];
                failures.push(TowerCheckFailure::Refinement {
                    level: k,
                    interval: parent,
                    lo: p.lo.clone(),
                    hi: p.hi.clone(),
                    detail: format!("parent holds {} intervals, expected {expected}", children[parent]),
                });
            }
        }
    }

    let profile = match &alpha {
        Some(a) => m_alpha_profile(a, primes_up_to),
        None => PrimeProfile { primes_up_to, valuations: Default::default(), capped: Default::default() },
    };
    let (primes_covered, primes_missing): (Vec<u64>, Vec<u64>) =
        super::primes_up_to(primes_up_to).into_iter().partition(|&p| profile.get(p) > 0);
    TowerReport {
        passed: failures.is_empty(),
        levels: tower.levels.len(),
        alpha: tower.alpha.clone(),
        periods: tower.levels.iter().map(|l| l.period).collect(),
        max_diameters: tower.levels.iter().map(|l| l.max_diameter.clone()).collect(),
        failures,
        profile,
        primes_covered,
        primes_missing,
    }
}
