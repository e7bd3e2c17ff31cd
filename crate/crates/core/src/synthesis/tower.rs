//! Nested cyclic levels: a nice approximation with a cycle through `t`,
//! followed by repeated period multiplication.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::approx::{build_nice_approximation, PerturbOptions};
use super::input::InputFunction;
use super::period::{carried_member_ids, dyadic_half_width, multiply_cycle_period, PeriodParams};
use super::retarget::{admissible_radius, apply_windows, Window};
use super::{ConstructionLog, CycleInterval, CyclicFamilyRef, SynthesisError};
use crate::exact::{q, ExactScalar};
use crate::pw_model::{certify_nice, Fate, ModelError, ModelFile, NiceFamily, PiecewiseModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerOptions {
    pub depth: usize,
    /// Multipliers for levels `2..=depth`.
    pub multipliers: Vec<usize>,
    pub epsilon_budget: ExactScalar,
    /// Measure budget of the base approximation.
    pub delta: ExactScalar,
    /// Measure budget for all period multiplications together.
    pub big_delta: ExactScalar,
    /// Per-level diameter caps; level `k` defaults to `1/(k+1)`.
    pub diameter_bounds: Option<Vec<ExactScalar>>,
    pub t: ExactScalar,
    pub seed: u64,
    pub max_attempts: usize,
}

impl TowerOptions {
    pub fn diameter_bound(&self, level: usize) -> ExactScalar {
        self.diameter_bounds
            .as_ref()
            .and_then(|b| b.get(level - 1).cloned())
            .unwrap_or_else(|| q(1, level as i64 + 1))
    }

    /// `budget · 2^-level`; the shares sum to less than the budget.
    pub fn epsilon_share(&self, level: usize) -> ExactScalar {
        &self.epsilon_budget * ExactScalar::pow2_recip(level as u32)
    }
}

#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub model: PiecewiseModel,
    pub family: NiceFamily,
    pub cycle: CyclicFamilyRef,
    pub period: usize,
    pub multiplier: usize,
    pub max_diameter: ExactScalar,
    pub diameter_bound: ExactScalar,
}

#[derive(Debug, Clone)]
pub struct RefinementTower {
    pub levels: Vec<TowerLevel>,
    /// `(n_1, m_2, …, m_K)`.
    pub alpha: Vec<u64>,
    pub log: ConstructionLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerLevelFile {
    pub model: ModelFile,
    pub family: NiceFamily,
    pub cycle: CyclicFamilyRef,
    pub period: usize,
    pub multiplier: usize,
    pub max_diameter: ExactScalar,
    pub diameter_bound: ExactScalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerFile {
    pub levels: Vec<TowerLevelFile>,
    pub alpha: Vec<u64>,
}

impl RefinementTower {
    pub fn to_file(&self) -> TowerFile {
        TowerFile {
            levels: self
                .levels
                .iter()
                .map(|l| TowerLevelFile {
                    model: ModelFile::from(&l.model),
                    family: l.family.clone(),
                    cycle: l.cycle.clone(),
                    period: l.period,
                    multiplier: l.multiplier,
                    max_diameter: l.max_diameter.clone(),
                    diameter_bound: l.diameter_bound.clone(),
                })
                .collect(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn from_file(file: TowerFile) -> Result<Self, ModelError> {
        let levels = file
            .levels
            .into_iter()
            .map(|l| {
                Ok(TowerLevel {
                    model: PiecewiseModel::try_from(l.model)?,
                    family: l.family,
                    cycle: l.cycle,
                    period: l.period,
                    multiplier: l.multiplier,
                    max_diameter: l.max_diameter,
                    diameter_bound: l.diameter_bound,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Self { levels, alpha: file.alpha, log: ConstructionLog::default() })
    }

    pub fn periods(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.period).collect()
    }
}

/// Follows member fates from the member containing `t`; returns the cycle
/// when the orbit comes back to that member after at least two steps.
pub fn find_cycle(model: &PiecewiseModel, family: &NiceFamily, t: &ExactScalar) -> Option<CyclicFamilyRef> {
    let start = family.member_containing(t).filter(|m| m.contains_interior(t))?;
    let mut chain = vec![start];
    loop {
        let current = chain.last().expect("chain is nonempty");
        let target = match &current.fate {
            Fate::LandsIn { target, .. } => *target,
            Fate::Escapes { .. } => return None,
        };
        if target == start.piece_id {
            if chain.len() < 2 {
                return None;
            }
            let n = chain.len();
            let intervals = chain
                .iter()
                .map(|m| CycleInterval { piece_id: m.piece_id, lo: m.lo.clone(), hi: m.hi.clone() })
                .collect::<Vec<_>>();
            let cycle_points = (0..n)
                .map(|i| match &chain[(i + n - 1) % n].fate {
                    Fate::LandsIn { point, .. } => point.clone(),
                    Fate::Escapes { .. } => unreachable!("chain members land"),
                })
                .collect();
            let cycle = CyclicFamilyRef { intervals, cycle_points };
            return cycle.check(model, family).is_ok().then_some(cycle);
        }
        if chain.iter().any(|m| m.piece_id == target) {
            return None;
        }
        chain.push(family.member_by_piece(target)?);
    }
}

struct Base {
    model: PiecewiseModel,
    family: NiceFamily,
    cycle: CyclicFamilyRef,
}

/// Uses a cycle through `t` if one exists; otherwise retargets the member `Q`
/// hit by the member `P ∋ t`, at the landing point, onto `t`.
fn create_cycle(
    model: PiecewiseModel,
    family: NiceFamily,
    t: &ExactScalar,
    epsilon: &ExactScalar,
    cap: &ExactScalar,
    log: &mut ConstructionLog,
) -> Result<Base, SynthesisError> {
    if let Some(cycle) = find_cycle(&model, &family, t) {
        log.push("tower", Some(1), "cycle_found", json!({ "length": cycle.len() }));
        return Ok(Base { model, family, cycle });
    }
    let p = family
        .member_containing(t)
        .filter(|m| m.contains_interior(t))
        .ok_or_else(|| SynthesisError::CycleCreation(format!("t = {t} is not interior to a family member")))?;
    let (q_id, landing) = match &p.fate {
        Fate::LandsIn { target, point } if *target != p.piece_id => (*target, point.clone()),
        Fate::LandsIn { .. } => return Err(SynthesisError::CycleCreation("the member containing t holds a root".into())),
        Fate::Escapes { .. } => return Err(SynthesisError::CycleCreation("the member containing t escapes".into())),
    };
    let piece_q = model.pieces()[q_id].clone();
    let image_q = piece_q.newton_image();
    let radius = admissible_radius(&piece_q, epsilon)
        .map_err(|e| SynthesisError::CycleCreation(format!("member hit from t cannot be retargeted: {e}")))?;
    let distance = (t - &image_q).abs();
    if distance >= radius {
        return Err(SynthesisError::CycleCreation(format!(
            "t is {distance} from the image of the member it lands in; admissible radius is {radius}"
        )));
    }
    let mut bound = cap.clone().min((&landing - &piece_q.lo).min(&piece_q.hi - &landing) / q(2, 1));
    for mem in &family.members {
        let img = model.pieces()[mem.piece_id].newton_image();
        if img != landing {
            bound = bound.min((&img - &landing).abs() / q(2, 1));
        }
    }
    let delta = dyadic_half_width(&bound, &piece_q.lo, &piece_q.hi)?;
    let window = Window { piece_id: q_id, x: landing.clone(), y: t.clone(), half_width: delta.clone() };
    let res = apply_windows(&model, &[window], epsilon)?;
    let family = certify_nice(&res.model, &carried_member_ids(&res, &family))?;
    let p_new = res.old_to_new[p.piece_id].expect("P is not split");
    let piece_p = res.model.pieces()[p_new].clone();
    let w = &res.windows[0];
    let cycle = CyclicFamilyRef {
        intervals: vec![
            CycleInterval { piece_id: p_new, lo: piece_p.lo, hi: piece_p.hi },
            CycleInterval { piece_id: w.central_id, lo: w.central_lo.clone(), hi: w.central_hi.clone() },
        ],
        cycle_points: vec![t.clone(), landing],
    };
    log.push("tower", Some(1), "cycle_created", json!({ "window": delta, "d1": res.d1_bound }));
    Ok(Base { model: res.model, family, cycle })
}

fn level_error(level: usize) -> impl Fn(SynthesisError) -> SynthesisError {
    move |e| e.at_level(level)
}

pub fn build_tower(f: &InputFunction, opts: &TowerOptions) -> Result<RefinementTower, SynthesisError> {
    if opts.depth == 0 {
        return Err(SynthesisError::Precondition("tower depth must be at least 1".into()));
    }
    if opts.multipliers.len() + 1 != opts.depth {
        return Err(SynthesisError::Precondition(format!(
            "{} multipliers given for depth {}",
            opts.multipliers.len(),
            opts.depth
        )));
    }
    if let Some(&m) = opts.multipliers.iter().find(|&&m| m < 2) {
        return Err(SynthesisError::Precondition(format!("multiplier {m} is below 2")));
    }
    let mut log = ConstructionLog::default();

    let share = opts.epsilon_share(1);
    let half = &share / q(2, 1);
    let bound1 = opts.diameter_bound(1);
    let approx = build_nice_approximation(
        f,
        &half,
        &opts.delta,
        &opts.t,
        opts.seed,
        PerturbOptions { max_attempts: opts.max_attempts },
    )
    .map_err(level_error(1))?;
    log.extend(approx.log);
    let base = create_cycle(approx.model, approx.family, &opts.t, &half, &bound1, &mut log).map_err(level_error(1))?;
    let max_diameter = base.cycle.max_diameter();
    if max_diameter > bound1 {
        return Err(SynthesisError::Validation {
            condition: "diameter".into(),
            detail: format!("base cycle diameter {max_diameter} exceeds {bound1}"),
        }
        .at_level(1));
    }
    let n1 = base.cycle.len();
    let mut levels = vec![TowerLevel {
        model: base.model,
        family: base.family,
        cycle: base.cycle,
        period: n1,
        multiplier: n1,
        max_diameter,
        diameter_bound: bound1,
    }];
    let mut alpha = vec![n1 as u64];

    for (offset, &m) in opts.multipliers.iter().enumerate() {
        let k = offset + 2;
        let prev = levels.last().expect("base level exists");
        let t = if prev.cycle.intervals.iter().any(|iv| iv.contains_interior(&opts.t)) {
            opts.t.clone()
        } else {
            log.push("tower", Some(k), "t_substituted", json!({ "t": prev.cycle.cycle_points[0] }));
            prev.cycle.cycle_points[0].clone()
        };
        let bound = opts.diameter_bound(k);
        let params = PeriodParams {
            epsilon: opts.epsilon_share(k),
            big_delta: &opts.big_delta * ExactScalar::pow2_recip(k as u32 - 1),
            seed: opts.seed.wrapping_add(k as u64),
            diameter_cap: Some(bound.clone()),
            max_attempts: opts.max_attempts,
        };
        let out = multiply_cycle_period(&prev.model, &prev.family, &prev.cycle, m, &t, &params).map_err(level_error(k))?;
        let mut sub = out.log;
        for e in &mut sub.events {
            e.level = Some(k);
        }
        log.extend(sub);
        let max_diameter = out.cycle.max_diameter();
        if max_diameter > bound || max_diameter >= prev.max_diameter {
            return Err(SynthesisError::Validation {
                condition: "diameter".into(),
                detail: format!("max diameter {max_diameter} against bound {bound} and previous {}", prev.max_diameter),
            }
            .at_level(k));
        }
        let period = prev.period * m;
        levels.push(TowerLevel {
            model: out.model,
            family: out.family,
            cycle: out.cycle,
            period,
            multiplier: m,
            max_diameter,
            diameter_bound: bound,
        });
        alpha.push(m as u64);
    }
    Ok(RefinementTower { levels, alpha, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{two_cycle_model, TWO_CYCLE_MEMBERS};

    #[test]
    fn finds_two_cycle() {
        let g = two_cycle_model();
        let family = certify_nice(&g, &TWO_CYCLE_MEMBERS).unwrap();
        let c = find_cycle(&g, &family, &q(1, 3)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.cycle_points, vec![q(1, 2), q(5, 2)]);
        c.check(&g, &family).unwrap();
        assert!(find_cycle(&g, &family, &q(-1, 1)).is_none());
    }

    fn cubic() -> InputFunction {
        // x³ − 2x + 2: Newton sends 0 to 1 and 1 back to 0
        InputFunction::polynomial(q(3, 2), vec![q(2, 1), q(-2, 1), q(0, 1), q(1, 1)]).unwrap()
    }

    fn options(multipliers: Vec<usize>) -> TowerOptions {
        TowerOptions {
            depth: multipliers.len() + 1,
            multipliers,
            epsilon_budget: q(1, 2),
            delta: q(1, 10),
            big_delta: q(1, 100),
            diameter_bounds: None,
            t: q(1, 100),
            seed: 11,
            max_attempts: 256,
        }
    }

    #[test]
    fn depth_one_is_a_single_cycle() {
        let tower = build_tower(&cubic(), &options(vec![])).unwrap();
        assert_eq!(tower.levels.len(), 1);
        assert_eq!(tower.alpha, vec![2]);
        let l = &tower.levels[0];
        l.cycle.check(&l.model, &l.family).unwrap();
    }

    #[test]
    fn periods_multiply() {
        let tower = build_tower(&cubic(), &options(vec![2, 3])).unwrap();
        assert_eq!(tower.periods(), vec![2, 4, 12]);
        assert_eq!(tower.alpha, vec![2, 2, 3]);
        for l in &tower.levels {
            l.cycle.check(&l.model, &l.family).unwrap();
        }
        let file = tower.to_file();
        let text = serde_json::to_string(&file).unwrap();
        let back: TowerFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn rejects_small_multiplier() {
        let err = build_tower(&cubic(), &options(vec![1])).unwrap_err();
        assert_eq!(err.code(), "E_PRECONDITION");
    }
}
