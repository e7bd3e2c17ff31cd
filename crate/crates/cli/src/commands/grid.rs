use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use newton_odometer_core::newton_dynamics::{classify, default_max_steps, TrajectoryOutcome};
use newton_odometer_core::pw_model::{measure_union, model_from_json, ModelError, NiceFamily, PiecewiseModel};
use newton_odometer_core::{q, ExactScalar};

use crate::config::{read_text, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{with_provenance, OutputDir};

pub const TAGS: [&str; 5] = ["diverge", "converge", "periodic", "in_gap", "undefined"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRecord {
    pub x: ExactScalar,
    pub tag: String,
    /// Period for periodic points, otherwise the step count of the fate.
    pub witness: Option<usize>,
    /// Newton steps taken before the outcome was decided.
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridReport {
    pub grid_points: usize,
    pub max_steps: usize,
    pub family_members: usize,
    pub measure_covered: ExactScalar,
    pub counts: BTreeMap<String, usize>,
    pub fractions: BTreeMap<String, ExactScalar>,
    pub records: Vec<GridRecord>,
}

impl GridReport {
    /// Recomputes the aggregates from the records.
    pub fn aggregates_consistent(&self) -> bool {
        let n = self.records.len();
        let mut total = ExactScalar::zero();
        for tag in TAGS {
            let c = self.records.iter().filter(|r| r.tag == tag).count();
            let frac = ExactScalar::new(c as i64, n as i64);
            if self.counts.get(tag) != Some(&c) || self.fractions.get(tag) != Some(&frac) {
                return false;
            }
            total = total + frac;
        }
        total == ExactScalar::one()
    }
}

/// `i·2M/(n−1) − M` for `i < n`; a single point sits at `t`.
pub fn grid(m: &ExactScalar, n: usize, t: &ExactScalar) -> Vec<ExactScalar> {
    if n == 1 {
        return vec![t.clone()];
    }
    let step = q(2, 1) * m / ExactScalar::from_integer(n as i64 - 1);
    (0..n).map(|i| ExactScalar::from_integer(i as i64) * &step - m).collect()
}

fn record(x: ExactScalar, outcome: TrajectoryOutcome) -> GridRecord {
    let (witness, steps) = match &outcome {
        TrajectoryOutcome::Diverges { steps, .. } => (Some(*steps), Some(*steps)),
        TrajectoryOutcome::ConvergesToRoot { steps_to_land, .. } => (Some(*steps_to_land), Some(steps_to_land + 1)),
        TrajectoryOutcome::EventuallyPeriodic { preperiod, period, .. } => (Some(*period), Some(preperiod + period)),
        TrajectoryOutcome::Undefined { .. } => (None, None),
    };
    GridRecord { x, tag: outcome.tag().to_string(), witness, steps }
}

pub fn load_model(path: &Path) -> Result<PiecewiseModel, HarnessError> {
    let text = read_text(path)?;
    model_from_json(&text).map_err(|e| match e {
        ModelError::Parse(_) => HarnessError::Input(format!("{}: {e}", path.display())),
        other => HarnessError::Validation(format!("{}: {other}", path.display())),
    })
}

pub fn load_family(path: &Path, model: &PiecewiseModel) -> Result<NiceFamily, HarnessError> {
    let text = read_text(path)?;
    let family: NiceFamily =
        serde_json::from_str(&text).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    family.recheck(model).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
    Ok(family)
}

pub fn classify_grid(
    cfg: &ExperimentConfig,
    model: &PiecewiseModel,
    family: &NiceFamily,
) -> Result<GridReport, HarnessError> {
    let m = cfg.resolve_half_width(model.half_width())?;
    let measure_covered = measure_union(family).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let max_steps = cfg.budgets.max_steps.unwrap_or_else(|| default_max_steps(model));
    let points = grid(&m, cfg.grid_points, &cfg.t);
    let pool = crate::thread_pool()?;
    let records: Vec<GridRecord> = pool.install(|| {
        points
            .into_par_iter()
            .map(|x| {
                let outcome = classify(model, family, &x, max_steps);
                record(x, outcome)
            })
            .collect()
    });
    let n = records.len() as i64;
    let mut counts: BTreeMap<String, usize> = TAGS.iter().map(|t| (t.to_string(), 0)).collect();
    for r in &records {
        *counts.get_mut(r.tag.as_str()).expect("known tag") += 1;
    }
    let fractions = counts.iter().map(|(k, &c)| (k.clone(), ExactScalar::new(c as i64, n))).collect();
    let report = GridReport {
        grid_points: records.len(),
        max_steps,
        family_members: family.len(),
        measure_covered,
        counts,
        fractions,
        records,
    };
    if !report.aggregates_consistent() {
        return Err(HarnessError::Validation("grid fractions do not match the records".into()));
    }
    Ok(report)
}

pub fn to_csv(report: &GridReport) -> String {
    let mut s = String::from("x,tag,period_or_steps\n");
    for r in &report.records {
        let w = r.witness.map(|w| w.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{}", r.x.to_f64(), r.tag, w).expect("string write");
    }
    s
}

pub fn run(cfg: &ExperimentConfig, model_path: &Path, family_path: &Path, out: &Path) -> Result<(), HarnessError> {
    let model = load_model(model_path)?;
    let family = load_family(family_path, &model)?;
    let report = classify_grid(cfg, &model, &family)?;
    let out = OutputDir::create(out)?;
    out.write_text("grid.csv", &to_csv(&report))?;
    out.write_json("grid_report.json", &with_provenance(cfg, "classify-grid", &report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use newton_odometer_core::fixtures::{two_cycle_model, TWO_CYCLE_MEMBERS};
    use newton_odometer_core::pw_model::certify_nice;

    #[test]
    fn grid_endpoints_and_single_point() {
        let g = grid(&q(2, 1), 5, &q(1, 3));
        assert_eq!(g, vec![q(-2, 1), q(-1, 1), q(0, 1), q(1, 1), q(2, 1)]);
        assert_eq!(grid(&q(2, 1), 1, &q(1, 3)), vec![q(1, 3)]);
    }

    #[test]
    fn two_cycle_grid_is_periodic_on_the_family() {
        let model = two_cycle_model();
        let family = certify_nice(&model, &TWO_CYCLE_MEMBERS).unwrap();
        let cfg = ExperimentConfig { grid_points: 101, ..Default::default() };
        let report = classify_grid(&cfg, &model, &family).unwrap();
        for r in &report.records {
            if family.contains(&r.x) && !family.members.iter().any(|m| m.lo == r.x || m.hi == r.x) {
                assert_eq!((r.tag.as_str(), r.witness), ("periodic", Some(2)), "{:?}", r.x);
            }
        }
        assert!(report.aggregates_consistent());
    }
}
