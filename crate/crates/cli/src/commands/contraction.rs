use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use newton_odometer_core::newton_dynamics::{
    contraction_certificate, verify_halving, ContractionCertificate, HalvingOutcome,
};
use newton_odometer_core::pw_model::{Line, PiecewiseModel};
use newton_odometer_core::synthesis::perturb_piece;
use newton_odometer_core::{q, ExactScalar};

use crate::commands::grid::load_model;
use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::output::{with_provenance, OutputDir};

pub const SAMPLES_PER_TRIAL: usize = 100;
const SAMPLE_BITS: u32 = 20;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub model: Option<PathBuf>,
    pub piece: usize,
    pub trials: Option<usize>,
    pub scale: Option<ExactScalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub d1_bound: Option<ExactScalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<HalvingOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub passed: bool,
    pub certificate: ContractionCertificate,
    pub perturbation_scale: ExactScalar,
    pub trials: usize,
    pub samples_per_trial: usize,
    pub trials_passed: usize,
    pub checks_passed: usize,
    /// Trials whose certified d₁ bound is below the certificate's δ.
    pub trials_within_delta: usize,
    pub max_d1_bound: ExactScalar,
    pub failures: Vec<TrialFailure>,
}

fn base_model(cfg: &ExperimentConfig, opts: &Options) -> Result<(PiecewiseModel, usize), HarnessError> {
    if let Some(path) = &opts.model {
        let model = load_model(path)?;
        return Ok((model, opts.piece));
    }
    let spec = cfg
        .piece
        .as_ref()
        .ok_or_else(|| HarnessError::Input("contraction needs --model or a `piece` in the config".into()))?;
    let m = cfg.half_width.clone().unwrap_or_else(|| q(1, 1));
    let line = Line::new(spec.slope.clone(), -(&spec.slope * &spec.root));
    let model = PiecewiseModel::affine(m, &line).map_err(|e| HarnessError::Input(e.to_string()))?;
    Ok((model, 0))
}

/// Samples on the dyadic grid of the piece, endpoints included.
fn samples(rng: &mut ChaCha8Rng, lo: &ExactScalar, hi: &ExactScalar) -> Vec<ExactScalar> {
    let den = 1i64 << SAMPLE_BITS;
    (0..SAMPLES_PER_TRIAL)
        .map(|_| lo + &((hi - lo) * ExactScalar::new(rng.gen_range(0..=den), den)))
        .collect()
}

struct TrialResult {
    d1_bound: Option<ExactScalar>,
    checked: usize,
    failure: Option<TrialFailure>,
}

fn run_trial(
    model: &PiecewiseModel,
    cert: &ContractionCertificate,
    scale: &ExactScalar,
    trial: usize,
    seed: u64,
) -> TrialResult {
    let fail = |d1: Option<ExactScalar>, counterexample, error| TrialResult {
        d1_bound: d1.clone(),
        checked: 0,
        failure: Some(TrialFailure { trial, seed, d1_bound: d1, counterexample, error }),
    };
    let p = match perturb_piece(model, cert.piece_id, scale, seed) {
        Ok(p) => p,
        Err(e) => return fail(None, None, Some(e.to_string())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = samples(&mut rng, &cert.piece.lo, &cert.piece.hi);
    match verify_halving(&p.model, cert, &xs) {
        Ok(HalvingOutcome::Pass { checked }) => TrialResult { d1_bound: Some(p.d1_bound), checked, failure: None },
        Ok(c) => fail(Some(p.d1_bound), Some(c), None),
        Err(e) => fail(Some(p.d1_bound), None, Some(e.to_string())),
    }
}

pub fn contraction(cfg: &ExperimentConfig, opts: &Options) -> Result<ContractionReport, HarnessError> {
    let (model, piece_id) = base_model(cfg, opts)?;
    let cert = contraction_certificate(&model, piece_id, &cfg.epsilon)
        .map_err(|e| HarnessError::Input(format!("certificate precondition: {e}")))?;
    let scale = opts.scale.clone().unwrap_or_else(|| cert.delta.clone());
    if !scale.is_positive() {
        return Err(HarnessError::Input("perturbation scale must be positive".into()));
    }
    let trials = opts.trials.unwrap_or(cfg.trials);
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..trials).map(|_| seeder.gen()).collect();
    let pool = crate::thread_pool()?;
    let results: Vec<TrialResult> = pool.install(|| {
        seeds.par_iter().enumerate().map(|(i, &s)| run_trial(&model, &cert, &scale, i, s)).collect()
    });
    let trials_passed = results.iter().filter(|r| r.failure.is_none()).count();
    let trials_within_delta =
        results.iter().filter(|r| r.d1_bound.as_ref().is_some_and(|d| d < &cert.delta)).count();
    let max_d1_bound = results.iter().filter_map(|r| r.d1_bound.clone()).max().unwrap_or_default();
    let checks_passed = results.iter().map(|r| r.checked).sum();
    let failures: Vec<TrialFailure> = results.into_iter().filter_map(|r| r.failure).collect();
    Ok(ContractionReport {
        passed: failures.is_empty(),
        certificate: cert,
        perturbation_scale: scale,
        trials,
        samples_per_trial: SAMPLES_PER_TRIAL,
        trials_passed,
        checks_passed,
        trials_within_delta,
        max_d1_bound,
        failures,
    })
}

pub fn run(cfg: &ExperimentConfig, opts: &Options, out: &Path) -> Result<(), HarnessError> {
    let report = contraction(cfg, opts)?;
    let out = OutputDir::create(out)?;
    out.write_json("contraction_report.json", &with_provenance(cfg, "contraction", &report))?;
    if !report.passed {
        return Err(HarnessError::Verification(format!(
            "{} of {} trials failed the halving check",
            report.failures.len(),
            report.trials
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PieceSpec;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            half_width: Some(q(1, 1)),
            piece: Some(PieceSpec { slope: q(1, 1), root: q(0, 1) }),
            t: q(1, 3),
            ..Default::default()
        }
    }

    #[test]
    fn zero_trials_pass_vacuously() {
        let r = contraction(&cfg(), &Options { trials: Some(0), ..Default::default() }).unwrap();
        assert!(r.passed);
        assert_eq!((r.trials, r.checks_passed), (0, 0));
        assert!(r.certificate.delta.is_positive());
    }

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let opts = Options { trials: Some(8), ..Default::default() };
        let a = contraction(&cfg(), &opts).unwrap();
        assert!(a.passed, "{:?}", a.failures);
        assert_eq!(a.checks_passed, 8 * SAMPLES_PER_TRIAL);
        assert_eq!(a.trials_within_delta, 8);
        assert_eq!(a, contraction(&cfg(), &opts).unwrap());
    }

    #[test]
    fn large_epsilon_is_rejected() {
        let c = ExperimentConfig { epsilon: q(1, 4), ..cfg() };
        assert!(matches!(contraction(&c, &Options::default()), Err(HarnessError::Input(_))));
    }
}
