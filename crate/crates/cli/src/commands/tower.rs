use std::path::Path;

use newton_odometer_core::odometer::{verify_tower, TowerReport};
use newton_odometer_core::synthesis::{build_tower, RefinementTower, TowerOptions};

use crate::commands::approximate::load_input;
use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::output::{with_provenance, OutputDir};

pub fn options(cfg: &ExperimentConfig) -> Result<TowerOptions, HarnessError> {
    Ok(TowerOptions {
        depth: cfg.depth,
        multipliers: cfg.level_multipliers()?,
        epsilon_budget: cfg.epsilon.clone(),
        delta: cfg.delta.clone(),
        big_delta: cfg.big_delta.clone(),
        diameter_bounds: None,
        t: cfg.t.clone(),
        seed: cfg.seed,
        max_attempts: cfg.budgets.rejection_retries,
    })
}

pub fn build_and_verify(
    cfg: &ExperimentConfig,
    input: &Path,
    primes: u64,
) -> Result<(RefinementTower, TowerReport), HarnessError> {
    let f = load_input(cfg, input)?;
    let opts = options(cfg)?;
    let tower = build_tower(&f, &opts)?;
    let report = verify_tower(&tower, primes);
    Ok((tower, report))
}

pub fn run(cfg: &ExperimentConfig, input: &Path, primes: u64, out: &Path) -> Result<(), HarnessError> {
    let (tower, report) = build_and_verify(cfg, input, primes)?;
    let out = OutputDir::create(out)?;
    out.write_json("tower.json", &tower.to_file())?;
    out.write_json("tower_verification.json", &with_provenance(cfg, "tower", &report))?;
    out.write_text("construction_log.jsonl", &tower.log.to_json_lines())?;
    if !report.passed {
        let first = &report.failures[0];
        return Err(HarnessError::Verification(format!(
            "{} failure(s); first is {} at level {:?}",
            report.failures.len(),
            first.kind(),
            first.level()
        )));
    }
    Ok(())
}
