use std::path::Path;

use newton_odometer_core::pw_model::model_to_json;
use newton_odometer_core::synthesis::{build_nice_approximation, InputFunction, PerturbOptions};

use crate::config::{read_text, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{with_provenance, OutputDir};

pub fn load_input(cfg: &ExperimentConfig, path: &Path) -> Result<InputFunction, HarnessError> {
    let text = read_text(path)?;
    let f = InputFunction::from_json(&text)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    cfg.resolve_half_width(f.half_width())?;
    Ok(f)
}

pub fn run(cfg: &ExperimentConfig, input: &Path, out: &Path) -> Result<(), HarnessError> {
    let f = load_input(cfg, input)?;
    let out = OutputDir::create(out)?;
    let opts = PerturbOptions { max_attempts: cfg.budgets.rejection_retries };
    let res = build_nice_approximation(&f, &cfg.epsilon, &cfg.delta, &cfg.t, cfg.seed, opts)?;
    out.write_text("model.json", &(model_to_json(&res.model) + "\n"))?;
    out.write_json("family.json", &res.family)?;
    out.write_json("approximation_report.json", &with_provenance(cfg, "approximate", &res.report))?;
    out.write_text("construction_log.jsonl", &res.log.to_json_lines())?;
    Ok(())
}
