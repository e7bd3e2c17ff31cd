use std::path::Path;

use serde::{Deserialize, Serialize};

use newton_odometer_core::odometer::{
    add_digits, add_one_digits, alpha_from_json, conjugate_up_to_depth, decode_u64, m_alpha_profile,
    orbit_cylinder_check, AlphaSequence, Conjugacy, CylinderCheck, OdometerError, PrimeProfile,
};

use crate::config::{read_text, ExperimentConfig};
use crate::error::HarnessError;
use crate::output::{with_provenance, OutputDir};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub entries: Vec<u64>,
    pub depth: usize,
    pub profile: PrimeProfile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdometerReport {
    pub passed: bool,
    pub alpha: SequenceSummary,
    pub orbit_depth: usize,
    pub orbit_check: CylinderCheck,
    /// Whether `add_one` and carry-adding `(1, 0, …)` agree on every prefix.
    pub plus_one_definitions_agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<SequenceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugacy: Option<Conjugacy>,
}

fn load_alpha(path: &Path) -> Result<AlphaSequence, HarnessError> {
    let text = read_text(path)?;
    alpha_from_json(&text).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))
}

fn summary(alpha: &AlphaSequence, primes: u64) -> SequenceSummary {
    SequenceSummary {
        entries: alpha.entries().to_vec(),
        depth: alpha.declared_depth(),
        profile: m_alpha_profile(alpha, primes),
    }
}

/// Compares the two `+1` maps on every depth-`k` prefix.
pub fn plus_one_definitions_agree(radices: &[u64]) -> bool {
    let m = radices.iter().product::<u64>();
    let k = radices.len();
    let mut one = vec![0u64; k];
    if k > 0 {
        one[0] = 1;
    }
    let (mut x, mut a, mut b) = (vec![0u64; k], vec![0u64; k], vec![0u64; k]);
    for code in 0..m {
        decode_u64(radices, code, &mut x);
        add_one_digits(radices, &x, &mut a);
        add_digits(radices, &x, &one, &mut b);
        if a != b {
            return false;
        }
    }
    true
}

pub fn verify(
    alpha: &AlphaSequence,
    beta: Option<&AlphaSequence>,
    depth: Option<usize>,
    primes: u64,
    limit: u64,
) -> Result<OdometerReport, HarnessError> {
    let k = depth.unwrap_or(alpha.declared_depth());
    if k == 0 || k > alpha.declared_depth() {
        return Err(HarnessError::Input(format!(
            "orbit depth {k} must lie in 1..={}",
            alpha.declared_depth()
        )));
    }
    let orbit_check = orbit_cylinder_check(alpha, k, limit).map_err(|e| match e {
        OdometerError::SizeError { .. } => HarnessError::Input(format!("exhaustive check too large: {e}")),
        other => HarnessError::Input(other.to_string()),
    })?;
    let radices = &alpha.entries()[..k];
    let agree = plus_one_definitions_agree(radices);
    let passed = matches!(orbit_check, CylinderCheck::Pass { .. }) && agree;
    Ok(OdometerReport {
        passed,
        alpha: summary(alpha, primes),
        orbit_depth: k,
        orbit_check,
        plus_one_definitions_agree: agree,
        beta: beta.map(|b| summary(b, primes)),
        conjugacy: beta.map(|b| conjugate_up_to_depth(alpha, b, primes, None)),
    })
}

pub fn run(
    cfg: &ExperimentConfig,
    alpha_path: &Path,
    beta_path: Option<&Path>,
    depth: Option<usize>,
    primes: u64,
    out: &Path,
) -> Result<(), HarnessError> {
    let alpha = load_alpha(alpha_path)?;
    let beta = beta_path.map(load_alpha).transpose()?;
    let report = verify(&alpha, beta.as_ref(), depth, primes, cfg.budgets.exhaustion_limit)?;
    let out = OutputDir::create(out)?;
    out.write_json("odometer_report.json", &with_provenance(cfg, "verify-odometer", &report))?;
    if !report.passed {
        return Err(HarnessError::Verification("odometer orbit check failed".into()));
    }
    Ok(())
}
