//! Nice piecewise-affine approximation: perturbed interpolation on a fine
//! partition, then C¹ bridges on small centred gaps around the corners.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ConstructionLog, InputFunction, SynthesisError};
use crate::exact::{q, ExactScalar};
use crate::pw_model::{certify_nice, measure_union, AffinePiece, Cell, GapSpec, Line, NiceFamily, PiecewiseModel};

/// Continuous piecewise-linear interpolant of `values` at increasing `nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub nodes: Vec<ExactScalar>,
    pub values: Vec<ExactScalar>,
}

impl PiecewiseLinear {
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Line of segment `i ∈ 1..=n` on `[z_{i−1}, z_i]`.
    pub fn line(&self, i: usize) -> Line {
        let slope = (&self.values[i] - &self.values[i - 1]) / (&self.nodes[i] - &self.nodes[i - 1]);
        Line::through(slope, &self.nodes[i], &self.values[i])
    }
}

fn segment_line(nodes: &[ExactScalar], w: &[ExactScalar], i: usize) -> Line {
    let slope = (&w[i] - &w[i - 1]) / (&nodes[i] - &nodes[i - 1]);
    Line::through(slope, &nodes[i], &w[i])
}

fn is_node(nodes: &[ExactScalar], x: &ExactScalar) -> bool {
    nodes.binary_search(x).is_ok()
}

/// Indices whose value must be redrawn for conditions (i)–(iii) and
/// pairwise distinctness to hold.
fn violations(nodes: &[ExactScalar], f: &[ExactScalar], w: &[ExactScalar], epsilon: &ExactScalar) -> Vec<(usize, &'static str)> {
    let bound = epsilon / q(12, 1);
    let mut out = Vec::new();
    let mut seen: HashMap<&ExactScalar, usize> = HashMap::new();
    for (i, wi) in w.iter().enumerate() {
        if (wi - &f[i]).abs() >= bound {
            out.push((i, "value"));
        } else if seen.insert(wi, i).is_some() {
            out.push((i, "duplicate"));
        }
    }
    for i in 1..w.len() {
        let h = &nodes[i] - &nodes[i - 1];
        let slope_f = (&f[i] - &f[i - 1]) / &h;
        let slope_w = (&w[i] - &w[i - 1]) / &h;
        if (slope_f - &slope_w).abs() >= bound {
            out.push((i, "slope"));
            continue;
        }
        if let Some(root) = segment_line(nodes, w, i).root() {
            if is_node(nodes, &root) {
                out.push((i, "root_on_node"));
            }
        }
    }
    out.sort_unstable();
    out.dedup_by_key(|v| v.0);
    out
}

const JITTER_BITS: u32 = 20;

/// Seeded rational jitter of `f(z_i)` until the values are pairwise distinct,
/// within `ε/12`, change every secant slope by less than `ε/12`, and no
/// segment root is a node. Valid input is returned unchanged.
pub fn perturb_values(
    nodes: &[ExactScalar],
    f_values: &[ExactScalar],
    epsilon: &ExactScalar,
    seed: u64,
    max_attempts: usize,
    log: &mut ConstructionLog,
) -> Result<Vec<ExactScalar>, SynthesisError> {
    if nodes.len() < 2 || nodes.len() != f_values.len() {
        return Err(SynthesisError::Precondition("need at least two nodes with one value each".into()));
    }
    if nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SynthesisError::Precondition("nodes must increase".into()));
    }
    if !epsilon.is_positive() {
        return Err(SynthesisError::Precondition("epsilon must be positive".into()));
    }
    let h_min = nodes.windows(2).map(|w| &w[1] - &w[0]).min().expect("two nodes");
    // |u| < 1 keeps |w − f| < ε/13 and each slope change below 2κ/h ≤ 2ε/25
    let kappa = (epsilon / q(13, 1)).min(epsilon * &h_min / q(25, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1i64 << JITTER_BITS;
    let mut w = f_values.to_vec();
    for attempt in 0..=max_attempts {
        let bad = violations(nodes, f_values, &w, epsilon);
        if bad.is_empty() {
            log.push("perturb_values", None, "accepted", json!({ "attempts": attempt }));
            return Ok(w);
        }
        if attempt == max_attempts {
            break;
        }
        for &(i, reason) in &bad {
            let k = rng.gen_range(-(scale - 1)..scale);
            w[i] = &f_values[i] + &(q(k, scale) * &kappa);
            log.push(
                "perturb_values",
                None,
                "rejection",
                json!({ "index": i, "reason": reason, "attempt": attempt, "redrawn": w[i].to_canonical_string() }),
            );
        }
    }
    Err(SynthesisError::RejectionBudget { stage: "perturb_values".into(), attempts: max_attempts })
}

fn dist_to_sorted(sorted: &[ExactScalar], x: &ExactScalar) -> Option<ExactScalar> {
    let idx = sorted.partition_point(|v| v < x);
    let mut best: Option<ExactScalar> = None;
    for j in [idx.wrapping_sub(1), idx] {
        if let Some(v) = sorted.get(j) {
            let d = (v - x).abs();
            best = Some(match best {
                Some(b) => b.min(d),
                None => d,
            });
        }
    }
    best
}

/// Dyadic half-widths of the gaps around interior nodes `z_1 … z_{n−1}`:
/// `ρ_i = 2^−k ≤ min(h/4, δ/(4n), dist(z_i, {±M, t} ∪ avoid)/2)`.
pub fn gap_radii(
    nodes: &[ExactScalar],
    avoid: &[ExactScalar],
    t: &ExactScalar,
    delta: &ExactScalar,
) -> Result<Vec<ExactScalar>, SynthesisError> {
    let n = nodes.len() - 1;
    let m = nodes[n].clone();
    let mut forbidden: Vec<ExactScalar> = avoid.to_vec();
    forbidden.extend([-&m, m, t.clone()]);
    forbidden.sort();
    let h_min = nodes.windows(2).map(|w| &w[1] - &w[0]).min().expect("two nodes");
    let cap = (h_min / q(4, 1)).min(delta / ExactScalar::from_integer(4 * n as i64));
    let mut radii = Vec::with_capacity(n.saturating_sub(1));
    for z in &nodes[1..n] {
        let d = dist_to_sorted(&forbidden, z).expect("forbidden set is nonempty") / q(2, 1);
        let bound = cap.clone().min(d);
        let (_, rho) = bound.pow2_floor().ok_or_else(|| SynthesisError::Placement {
            lo: z.clone(),
            hi: z.clone(),
            reason: "node coincides with a forbidden point".into(),
        })?;
        radii.push(rho);
    }
    Ok(radii)
}

/// Replaces the corner of `h` inside each gap by a cubic Hermite bridge.
///
/// Every gap must contain exactly one interior node strictly inside, and every
/// node where the slope changes must be covered by a gap.
pub fn smooth_gaps(h: &PiecewiseLinear, gaps: &[(ExactScalar, ExactScalar)]) -> Result<PiecewiseModel, SynthesisError> {
    let nodes = &h.nodes;
    let n = nodes.len() - 1;
    let m = nodes[n].clone();
    if nodes[0] != -&m {
        return Err(SynthesisError::Precondition("nodes must span [-M, M]".into()));
    }
    let mut cells = Vec::with_capacity(2 * gaps.len() + 1);
    let mut cursor = -&m;
    // segment index (1-based) covering the region right of `cursor`
    let mut seg = 1usize;
    for (lo, hi) in gaps {
        if lo <= &cursor || hi >= &m {
            return Err(SynthesisError::Precondition(format!("gap ({lo}, {hi}) is misplaced")));
        }
        let first = nodes.partition_point(|z| z <= lo);
        let end = nodes.partition_point(|z| z < hi);
        if end != first + 1 || first == 0 || first >= n || is_node(nodes, lo) || is_node(nodes, hi) {
            return Err(SynthesisError::Precondition(format!("gap ({lo}, {hi}) must contain exactly one breakpoint")));
        }
        let i = first;
        // piece [cursor, lo] must lie on a single line
        let line = h.line(seg);
        for s in seg + 1..=i {
            if h.line(s) != line {
                return Err(SynthesisError::Precondition(format!("corner at {} is not covered by a gap", nodes[s - 1])));
            }
        }
        cells.push(Cell::Piece(AffinePiece::on_line(cursor.clone(), lo.clone(), &line)));
        cells.push(Cell::Gap(GapSpec { lo: lo.clone(), hi: hi.clone(), left: line, right: h.line(i + 1) }));
        cursor = hi.clone();
        seg = i + 1;
    }
    let line = h.line(seg);
    for s in seg + 1..=n {
        if h.line(s) != line {
            return Err(SynthesisError::Precondition(format!("corner at {} is not covered by a gap", nodes[s - 1])));
        }
    }
    cells.push(Cell::Piece(AffinePiece::on_line(cursor, m.clone(), &line)));
    let model = PiecewiseModel::from_cells(m, cells)?;
    for g in model.gaps() {
        if !g.derivative_within_hull() {
            return Err(SynthesisError::Validation {
                condition: "derivative hull".into(),
                detail: format!("bridge on ({}, {}) leaves the slope hull", g.lo, g.hi),
            });
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub epsilon: ExactScalar,
    pub delta: ExactScalar,
    pub t: ExactScalar,
    pub d1_bound: ExactScalar,
    pub d1_ok: bool,
    pub measure: ExactScalar,
    pub required_measure: ExactScalar,
    pub measure_ok: bool,
    pub t_interior: bool,
    pub nice: bool,
    pub gaps_avoid_forbidden: bool,
    pub fineness: ExactScalar,
    pub nodes: usize,
    pub pieces: usize,
    pub gaps: usize,
}

impl ApproximationReport {
    pub fn all_ok(&self) -> bool {
        self.d1_ok && self.measure_ok && self.t_interior && self.nice && self.gaps_avoid_forbidden
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationResult {
    pub model: PiecewiseModel,
    pub family: NiceFamily,
    pub interpolant: PiecewiseLinear,
    pub report: ApproximationReport,
    pub log: ConstructionLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbOptions {
    pub max_attempts: usize,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self { max_attempts: 64 }
    }
}

/// Builds `(g, ℱ)` with `d₁(f, g) < ε`, `λ(⋃ℱ) > 2M − δ`, `t ∈ Int ⋃ℱ` and
/// `g` nice to `ℱ`; every condition is re-checked by independent validators.
pub fn build_nice_approximation(
    f: &InputFunction,
    epsilon: &ExactScalar,
    delta: &ExactScalar,
    t: &ExactScalar,
    seed: u64,
    opts: PerturbOptions,
) -> Result<ApproximationResult, SynthesisError> {
    let m = f.half_width().clone();
    if !(t > &-&m && t < &m) {
        return Err(SynthesisError::Precondition(format!("t = {t} is not inside (-M, M)")));
    }
    if !epsilon.is_positive() || !delta.is_positive() {
        return Err(SynthesisError::Precondition("epsilon and delta must be positive".into()));
    }
    let mut log = ConstructionLog::default();
    let two_m = q(2, 1) * &m;
    let r = f.modulus().separation_for(&(epsilon / q(12, 1))).unwrap_or_else(|| two_m.clone());
    // n equal segments of width 2M/n < r, with t not a node
    let mut n = crate::exact::floor_div(&two_m, &r);
    n += 1u32;
    let mut n: i64 = i64::try_from(n).map_err(|_| SynthesisError::Precondition("partition too fine".into()))?;
    loop {
        let k = (t + &m) * ExactScalar::from_integer(n) / &two_m;
        if !k.is_integer() {
            break;
        }
        n += 1;
    }
    let h = &two_m / ExactScalar::from_integer(n);
    let nodes: Vec<ExactScalar> = (0..=n).map(|k| -&m + &(ExactScalar::from_integer(k) * &h)).collect();
    let f_values: Vec<ExactScalar> = nodes.iter().map(|z| f.eval(z)).collect();
    log.push("build_nice_approximation", None, "partition", json!({ "segments": n, "width": h.to_canonical_string() }));
    let w = perturb_values(&nodes, &f_values, epsilon, seed, opts.max_attempts, &mut log)?;
    let interp = PiecewiseLinear { nodes: nodes.clone(), values: w };
    let mut roots: Vec<ExactScalar> = (1..=interp.segments()).filter_map(|i| interp.line(i).root()).collect();
    roots.sort();
    let radii = gap_radii(&nodes, &roots, t, delta)?;
    let gaps: Vec<(ExactScalar, ExactScalar)> =
        nodes[1..nodes.len() - 1].iter().zip(&radii).map(|(z, r)| (z - r, z + r)).collect();
    let model = smooth_gaps(&interp, &gaps)?;
    let ids: Vec<usize> = (0..model.pieces().len()).collect();
    let family = certify_nice(&model, &ids)?;
    let report = validate(f, &model, &family, &roots, epsilon, delta, t, &r, nodes.len())?;
    if !report.all_ok() {
        return Err(SynthesisError::Validation {
            condition: "approximation".into(),
            detail: serde_json::to_string(&report).expect("report serializes"),
        });
    }
    Ok(ApproximationResult { model, family, interpolant: interp, report, log })
}

#[allow(clippy::too_many_arguments)]
fn validate(
    f: &InputFunction,
    model: &PiecewiseModel,
    family: &NiceFamily,
    roots: &[ExactScalar],
    epsilon: &ExactScalar,
    delta: &ExactScalar,
    t: &ExactScalar,
    fineness: &ExactScalar,
    nodes: usize,
) -> Result<ApproximationReport, SynthesisError> {
    let m = model.half_width();
    let tol = epsilon / q(1024, 1);
    let d1_bound = f.as_piecewise_poly().d1_parts(&model.to_piecewise_poly(), &tol).total();
    let measure = measure_union(family)?;
    let required_measure = q(2, 1) * m - delta;
    let t_interior = family.contains_interior(t);
    let nice = family.recheck(model).is_ok();
    let gaps_avoid_forbidden = model.gaps().iter().all(|g| {
        let hits = |x: &ExactScalar| &g.lo <= x && x <= &g.hi;
        !hits(&-m) && !hits(m) && !hits(t) && {
            let idx = roots.partition_point(|r| r < &g.lo);
            roots.get(idx).is_none_or(|r| r > &g.hi)
        }
    });
    Ok(ApproximationReport {
        epsilon: epsilon.clone(),
        delta: delta.clone(),
        t: t.clone(),
        d1_ok: &d1_bound < epsilon,
        d1_bound,
        measure_ok: measure > required_measure,
        measure,
        required_measure,
        t_interior,
        nice,
        gaps_avoid_forbidden,
        fineness: fineness.clone(),
        nodes,
        pieces: model.pieces().len(),
        gaps: model.gaps().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pw_model::Fate;

    #[test]
    fn valid_values_are_unchanged() {
        let nodes = vec![q(-1, 1), q(0, 1), q(1, 1)];
        let vals = vec![q(1, 1), q(3, 1), q(7, 1)];
        let mut log = ConstructionLog::default();
        assert_eq!(perturb_values(&nodes, &vals, &q(1, 10), 7, 8, &mut log).unwrap(), vals);
    }

    #[test]
    fn equal_values_get_separated() {
        let nodes = vec![q(-1, 1), q(0, 1), q(1, 1), q(2, 1)];
        let vals = vec![q(1, 1), q(2, 1), q(2, 1), q(5, 1)];
        let eps = q(1, 10);
        let mut log = ConstructionLog::default();
        let w = perturb_values(&nodes, &vals, &eps, 7, 8, &mut log).unwrap();
        assert_ne!(w[1], w[2]);
        assert!(violations(&nodes, &vals, &w, &eps).is_empty());
        assert!(log.count("rejection") >= 1);
    }

    #[test]
    fn root_on_node_is_moved() {
        // segment [0, 1] with values −1 → 1 has root 1/2; on nodes {…, 1/2, …}
        let nodes = vec![q(0, 1), q(1, 2), q(1, 1)];
        let vals = vec![q(-1, 1), q(0, 1), q(1, 1)];
        let eps = q(1, 10);
        let mut log = ConstructionLog::default();
        let w = perturb_values(&nodes, &vals, &eps, 3, 16, &mut log).unwrap();
        for i in 1..3 {
            let r = segment_line(&nodes, &w, i).root().unwrap();
            assert!(!nodes.contains(&r));
        }
    }

    #[test]
    fn smoothing_examples() {
        // equal slopes: bridge is the line itself
        let h = PiecewiseLinear { nodes: vec![q(-1, 1), q(0, 1), q(1, 1)], values: vec![q(-1, 1), q(0, 1), q(1, 1)] };
        let m = smooth_gaps(&h, &[(q(-1, 4), q(1, 4))]).unwrap();
        assert_eq!(m.gaps()[0].derivative_range, (q(1, 1), q(1, 1)));
        // slopes 1 and 2 across a gap of length 1/10
        let h = PiecewiseLinear { nodes: vec![q(-1, 1), q(0, 1), q(1, 1)], values: vec![q(-1, 1), q(0, 1), q(2, 1)] };
        let m = smooth_gaps(&h, &[(q(-1, 20), q(1, 20))]).unwrap();
        let (lo, hi) = m.gaps()[0].derivative_range.clone();
        assert!(lo >= q(1, 1) && hi <= q(2, 1));
        // three breakpoints, three gaps
        let h = PiecewiseLinear {
            nodes: vec![q(-2, 1), q(-1, 1), q(0, 1), q(1, 1), q(2, 1)],
            values: vec![q(0, 1), q(1, 1), q(3, 1), q(2, 1), q(5, 1)],
        };
        let gaps = [(q(-9, 8), q(-7, 8)), (q(-1, 8), q(1, 8)), (q(7, 8), q(9, 8))];
        let m = smooth_gaps(&h, &gaps).unwrap();
        assert_eq!(m.gaps().len(), 3);
        assert_eq!(m.pieces().len(), 4);
        assert!(matches!(smooth_gaps(&h, &gaps[..2]), Err(SynthesisError::Precondition(_))));
        assert!(matches!(smooth_gaps(&h, &[(q(-3, 2), q(-1, 2))]), Err(SynthesisError::Precondition(_))));
    }

    #[test]
    fn affine_input_with_far_root_escapes_everywhere() {
        let f = InputFunction::polynomial(q(1, 1), vec![q(3, 1), q(1, 1)]).unwrap();
        let res = build_nice_approximation(&f, &q(1, 10), &q(1, 10), &q(1, 3), 1, PerturbOptions::default()).unwrap();
        assert!(res.report.all_ok());
        assert!(res.family.members.iter().all(|m| matches!(m.fate, Fate::Escapes { .. })));
    }

    #[test]
    fn identity_input_has_a_root_piece() {
        let f = InputFunction::polynomial(q(1, 1), vec![q(0, 1), q(1, 1)]).unwrap();
        let res = build_nice_approximation(&f, &q(1, 10), &q(1, 10), &q(1, 3), 1, PerturbOptions::default()).unwrap();
        assert!(res.report.all_ok());
        let self_landing = res
            .family
            .members
            .iter()
            .filter(|m| matches!(m.fate, Fate::LandsIn { target, .. } if target == m.piece_id))
            .count();
        assert_eq!(self_landing, 1);
    }
}
