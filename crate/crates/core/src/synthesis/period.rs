//! Multiplies the period of a cyclic family by `m` by retargeting `m`
//! windows inside each cycle interval.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::retarget::{admissible_radius, apply_windows, RetargetResult, Window};
use super::{ConstructionLog, CycleInterval, CyclicFamilyRef, SynthesisError};
use crate::exact::{q, ExactScalar};
use crate::newton_dynamics::{classify, default_max_steps, TrajectoryOutcome};
use crate::pw_model::{certify_nice, Fate, NiceFamily, PiecewiseModel};

/// Windows narrower than this are treated as a placement failure.
const MIN_WINDOW_LOG2: u32 = 60;
const OFFSET_BITS: u32 = 20;
const CANDIDATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodParams {
    pub epsilon: ExactScalar,
    /// Budget for the measure removed from the cycle intervals.
    pub big_delta: ExactScalar,
    pub seed: u64,
    /// Upper bound on the window half-width, which also bounds the new
    /// intervals' diameters.
    pub diameter_cap: Option<ExactScalar>,
    pub max_attempts: usize,
}

impl PeriodParams {
    pub fn new(epsilon: ExactScalar, big_delta: ExactScalar, seed: u64) -> Self {
        Self { epsilon, big_delta, seed, diameter_cap: None, max_attempts: 256 }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodMultiplication {
    pub model: PiecewiseModel,
    pub family: NiceFamily,
    /// Ordered `K_1^0, K_1^1, …, K_1^n, K_2^0, …, K_m^n`.
    pub cycle: CyclicFamilyRef,
    /// Members of the new family that lie inside the old cycle intervals.
    pub refined_ids: Vec<usize>,
    pub window_half_width: ExactScalar,
    pub measure_loss: ExactScalar,
    pub d1_bound: ExactScalar,
    pub log: ConstructionLog,
}

fn dist_to_sorted(sorted: &[ExactScalar], x: &ExactScalar) -> Option<ExactScalar> {
    let i = sorted.partition_point(|p| p < x);
    let right = sorted.get(i).map(|p| p - x);
    let left = i.checked_sub(1).map(|k| x - &sorted[k]);
    match (left, right) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Family ids after a window application: untouched members keep their
/// piece, split members contribute their outer parts, and every window placed
/// on a member contributes its central piece.
pub(crate) fn carried_member_ids(res: &RetargetResult, family: &NiceFamily) -> Vec<usize> {
    let mut ids = Vec::new();
    for old in family.piece_ids() {
        match res.old_to_new[old] {
            Some(id) => ids.push(id),
            None => {
                if let Some((_, outer)) = res.outer_parts.iter().find(|(o, _)| *o == old) {
                    ids.extend(outer.iter().copied());
                }
            }
        }
    }
    for w in &res.windows {
        if family.member_by_piece(w.window.piece_id).is_some() {
            ids.push(w.central_id);
        }
    }
    ids
}

/// Largest power of two not above `bound`, or a placement error below the floor.
pub(crate) fn dyadic_half_width(bound: &ExactScalar, lo: &ExactScalar, hi: &ExactScalar) -> Result<ExactScalar, SynthesisError> {
    match bound.pow2_floor() {
        Some((k, v)) if k <= MIN_WINDOW_LOG2 => Ok(v),
        _ => Err(SynthesisError::Placement {
            lo: lo.clone(),
            hi: hi.clone(),
            reason: format!("window half-width bound {bound} is below 2^-{MIN_WINDOW_LOG2}"),
        }),
    }
}

pub fn multiply_cycle_period(
    g: &PiecewiseModel,
    family: &NiceFamily,
    cycle: &CyclicFamilyRef,
    m: usize,
    t: &ExactScalar,
    params: &PeriodParams,
) -> Result<PeriodMultiplication, SynthesisError> {
    cycle.check(g, family)?;
    let len = cycle.len();
    if len < 2 {
        return Err(SynthesisError::Precondition("cycle period must exceed 1".into()));
    }
    if m == 0 {
        return Err(SynthesisError::Precondition("multiplier must be at least 1".into()));
    }
    if !params.epsilon.is_positive() || !params.big_delta.is_positive() {
        return Err(SynthesisError::Precondition("epsilon and Delta must be positive".into()));
    }
    if !cycle.intervals.iter().any(|iv| iv.contains_interior(t)) {
        return Err(SynthesisError::Precondition(format!("t = {t} is not interior to a cycle interval")));
    }
    let mut log = ConstructionLog::default();

    let mut forbidden: Vec<ExactScalar> = family
        .members
        .iter()
        .map(|mem| g.pieces()[mem.piece_id].newton_image())
        .chain(std::iter::once(t.clone()))
        .filter(|p| !cycle.cycle_points.contains(p))
        .collect();
    forbidden.sort();
    forbidden.dedup();

    let radii = cycle
        .intervals
        .iter()
        .map(|iv| admissible_radius(&g.pieces()[iv.piece_id], &params.epsilon))
        .collect::<Result<Vec<_>, _>>()?;

    // points[i][0] = z_i; the others are drawn within half the predecessor's
    // admissible radius, since J_{i−1}'s window is what retargets onto them
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scale = ExactScalar::pow2_recip(OFFSET_BITS);
    let span = 1i64 << OFFSET_BITS;
    let mut points: Vec<Vec<ExactScalar>> = Vec::with_capacity(len);
    for (i, iv) in cycle.intervals.iter().enumerate() {
        let z = &cycle.cycle_points[i];
        let reach = (&radii[(i + len - 1) % len] / q(2, 1)).min((z - &iv.lo).min(&iv.hi - z));
        let mut pts = vec![z.clone()];
        let mut attempts = 0usize;
        while pts.len() < m {
            // best of CANDIDATES admissible draws, scored by clearance from the
            // boundary, the forbidden set and the points already placed
            let mut best: Option<(ExactScalar, ExactScalar)> = None;
            let mut drawn = 0usize;
            while drawn < CANDIDATES {
                attempts += 1;
                if attempts > params.max_attempts {
                    break;
                }
                let k = rng.gen_range(1 - span..span);
                let x = z + &reach * &scale * ExactScalar::from_integer(k);
                let reject = if !iv.contains_interior(&x) {
                    Some("outside interval")
                } else if forbidden.binary_search(&x).is_ok() {
                    Some("forbidden point")
                } else if pts.contains(&x) {
                    Some("duplicate")
                } else {
                    None
                };
                if let Some(reason) = reject {
                    log.push("period", None, "reject", json!({ "interval": i, "x": x, "reason": reason }));
                    continue;
                }
                drawn += 1;
                let mut clearance = (&x - &iv.lo).min(&iv.hi - &x);
                if let Some(d) = dist_to_sorted(&forbidden, &x) {
                    clearance = clearance.min(d);
                }
                for p in &pts {
                    clearance = clearance.min((&x - p).abs() / q(2, 1));
                }
                if best.as_ref().is_none_or(|(c, _)| &clearance > c) {
                    best = Some((clearance, x));
                }
            }
            match best {
                Some((_, x)) => pts.push(x),
                None => {
                    return Err(SynthesisError::Placement {
                        lo: iv.lo.clone(),
                        hi: iv.hi.clone(),
                        reason: format!("no admissible point after {} attempts", params.max_attempts),
                    })
                }
            }
        }
        points.push(pts);
    }

    let mut bound = &params.big_delta / ExactScalar::from_integer((4 * m * len) as i64);
    if let Some(cap) = &params.diameter_cap {
        bound = bound.min(cap.clone());
    }
    for (iv, pts) in cycle.intervals.iter().zip(&points) {
        let mut sorted = pts.clone();
        sorted.sort();
        for w in sorted.windows(2) {
            bound = bound.min((&w[1] - &w[0]) / q(4, 1));
        }
        for x in &sorted {
            bound = bound.min((x - &iv.lo).min(&iv.hi - x) / q(2, 1));
            if let Some(d) = dist_to_sorted(&forbidden, x) {
                bound = bound.min(d / q(2, 1));
            }
        }
    }
    let (lo, hi) = (&cycle.intervals[0].lo, &cycle.intervals[len - 1].hi);
    let delta = dyadic_half_width(&bound, lo, hi)?;
    log.push("period", None, "window", json!({ "half_width": delta, "m": m, "cycle_length": len }));

    let mut windows = Vec::with_capacity(m * len);
    for i in 0..len {
        for j in 0..m {
            let y = if i + 1 < len { points[i + 1][j].clone() } else { points[0][(j + 1) % m].clone() };
            windows.push(Window {
                piece_id: cycle.intervals[i].piece_id,
                x: points[i][j].clone(),
                y,
                half_width: delta.clone(),
            });
        }
    }
    let res = apply_windows(g, &windows, &params.epsilon)?;
    let new_family = certify_nice(&res.model, &carried_member_ids(&res, family))?;

    let mut intervals = Vec::with_capacity(m * len);
    let mut cycle_points = Vec::with_capacity(m * len);
    for j in 0..m {
        for i in 0..len {
            let w = &res.windows[i * m + j];
            intervals.push(CycleInterval { piece_id: w.central_id, lo: w.central_lo.clone(), hi: w.central_hi.clone() });
            cycle_points.push(w.window.x.clone());
        }
    }
    let new_cycle = CyclicFamilyRef { intervals, cycle_points };
    new_cycle.check(&res.model, &new_family)?;

    let refined_ids: Vec<usize> = new_family
        .members
        .iter()
        .filter(|mem| cycle.intervals.iter().any(|iv| iv.lo <= mem.lo && mem.hi <= iv.hi))
        .map(|mem| mem.piece_id)
        .collect();
    let kept: ExactScalar = refined_ids.iter().map(|&id| res.model.pieces()[id].length()).sum();
    let measure_loss = cycle.measure() - kept;
    if measure_loss >= params.big_delta {
        return Err(SynthesisError::Validation {
            condition: "measure loss".into(),
            detail: format!("removed {measure_loss}, budget {}", params.big_delta),
        });
    }
    if !refined_ids.iter().any(|&id| res.model.pieces()[id].contains_interior(t)) {
        return Err(SynthesisError::Validation { condition: "t interior".into(), detail: format!("t = {t}") });
    }
    // every refined member lands on a cycle point, so one classification of
    // the cycle settles the period of all of them
    let expected = m * len;
    match classify(&res.model, &new_family, &new_cycle.cycle_points[0], default_max_steps(&res.model)) {
        TrajectoryOutcome::EventuallyPeriodic { period, .. } if period == expected => {}
        other => {
            return Err(SynthesisError::Validation {
                condition: "period".into(),
                detail: format!("cycle classified as {other:?}, expected period {expected}"),
            })
        }
    }
    let on_cycle: HashSet<&ExactScalar> = new_cycle.cycle_points.iter().collect();
    for &id in &refined_ids {
        let lands = matches!(&new_family.member_by_piece(id).expect("refined ids are members").fate,
            Fate::LandsIn { point, .. } if on_cycle.contains(point));
        if !lands {
            return Err(SynthesisError::Validation {
                condition: "period".into(),
                detail: format!("member {id} does not land on the new cycle"),
            });
        }
    }
    log.push("period", None, "accepted", json!({ "period": expected, "measure_loss": measure_loss, "d1": res.d1_bound }));

    Ok(PeriodMultiplication {
        model: res.model,
        family: new_family,
        cycle: new_cycle,
        refined_ids,
        window_half_width: delta,
        measure_loss,
        d1_bound: res.d1_bound,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{two_cycle_model, TWO_CYCLE_MEMBERS};
    use crate::pw_model::Cell;

    fn two_cycle() -> (PiecewiseModel, NiceFamily, CyclicFamilyRef) {
        let g = two_cycle_model();
        let family = certify_nice(&g, &TWO_CYCLE_MEMBERS).unwrap();
        let cycle = CyclicFamilyRef {
            intervals: vec![
                CycleInterval { piece_id: 1, lo: q(0, 1), hi: q(1, 1) },
                CycleInterval { piece_id: 2, lo: q(2, 1), hi: q(3, 1) },
            ],
            cycle_points: vec![q(1, 2), q(5, 2)],
        };
        (g, family, cycle)
    }

    #[test]
    fn multiplier_three_gives_period_six() {
        let (g, family, cycle) = two_cycle();
        let params = PeriodParams::new(q(1, 2), q(1, 100), 7);
        let out = multiply_cycle_period(&g, &family, &cycle, 3, &q(1, 3), &params).unwrap();
        assert_eq!(out.cycle.len(), 6);
        assert!(out.measure_loss < q(1, 100));
        assert!(out.d1_bound < q(1, 2));
        let x = out.cycle.cycle_points[0].clone();
        assert_eq!(classify(&out.model, &out.family, &x, 100).period(), Some(6));
        // the cells left of J_0 are untouched
        let before: Vec<Cell> = g.cells().into_iter().filter(|c| c.hi() <= &q(0, 1)).collect();
        let after: Vec<Cell> = out.model.cells().into_iter().filter(|c| c.hi() <= &q(0, 1)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn multiplier_one_keeps_period() {
        let (g, family, cycle) = two_cycle();
        let params = PeriodParams::new(q(1, 2), q(1, 100), 1);
        let out = multiply_cycle_period(&g, &family, &cycle, 1, &q(1, 3), &params).unwrap();
        assert_eq!(out.cycle.len(), 2);
        assert_eq!(out.cycle.cycle_points, cycle.cycle_points);
    }

    #[test]
    fn deterministic_per_seed() {
        let (g, family, cycle) = two_cycle();
        let params = PeriodParams::new(q(1, 2), q(1, 100), 3);
        let a = multiply_cycle_period(&g, &family, &cycle, 2, &q(1, 3), &params).unwrap();
        let b = multiply_cycle_period(&g, &family, &cycle, 2, &q(1, 3), &params).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.cycle, b.cycle);
    }

    #[test]
    fn rejects_t_outside_cycle() {
        let (g, family, cycle) = two_cycle();
        let params = PeriodParams::new(q(1, 2), q(1, 100), 3);
        let err = multiply_cycle_period(&g, &family, &cycle, 2, &q(-1, 1), &params).unwrap_err();
        assert_eq!(err.code(), "E_PRECONDITION");
    }
}
