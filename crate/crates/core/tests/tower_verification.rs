use newton_odometer_core::odometer::{verify_tower, TowerCheckFailure};
use newton_odometer_core::q;
use newton_odometer_core::synthesis::{build_tower, InputFunction, RefinementTower, TowerOptions};

fn cubic() -> InputFunction {
    InputFunction::polynomial(q(3, 2), vec![q(2, 1), q(-2, 1), q(0, 1), q(1, 1)]).unwrap()
}

fn tower(multipliers: Vec<usize>) -> RefinementTower {
    let opts = TowerOptions {
        depth: multipliers.len() + 1,
        multipliers,
        epsilon_budget: q(1, 2),
        delta: q(1, 10),
        big_delta: q(1, 100),
        diameter_bounds: None,
        t: q(1, 100),
        seed: 5,
        max_attempts: 256,
    };
    build_tower(&cubic(), &opts).unwrap()
}

fn has(failures: &[TowerCheckFailure], kind: &str, level: usize) -> bool {
    failures.iter().any(|f| f.kind() == kind && f.level() == Some(level))
}

#[test]
fn depth_three_tower_verifies() {
    let t = tower(vec![2, 3]);
    assert_eq!(t.periods(), vec![2, 4, 12]);
    let report = verify_tower(&t, 3);
    assert!(report.passed, "{:?}", report.failures);
    assert_eq!(report.primes_covered, vec![2, 3]);
}

#[test]
fn depth_five_tower_covers_small_primes() {
    let t = tower(vec![2, 3, 4, 5]);
    assert_eq!(t.periods(), vec![2, 4, 12, 48, 240]);
    let report = verify_tower(&t, 5);
    assert!(report.passed, "{:?}", report.failures);
    assert_eq!(report.primes_covered, vec![2, 3, 5]);
    for w in report.max_diameters.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn displaced_interval_fails_refinement_at_its_level() {
    let mut t = tower(vec![2, 3]);
    let iv = &mut t.levels[2].cycle.intervals[4];
    iv.lo = q(-1, 1);
    iv.hi = q(-9, 10);
    let report = verify_tower(&t, 3);
    assert!(!report.passed);
    assert!(has(&report.failures, "refinement", 3));
    assert!(!has(&report.failures, "refinement", 2));
}

#[test]
fn wrong_period_fails_cardinality() {
    let mut t = tower(vec![2, 3]);
    t.levels[1].period = 6;
    let report = verify_tower(&t, 3);
    assert!(has(&report.failures, "cardinality", 2));
    assert!(!has(&report.failures, "cardinality", 1));
}

#[test]
fn reordered_cycle_fails_cyclic_check() {
    let mut t = tower(vec![2, 3]);
    let c = &mut t.levels[1].cycle;
    c.intervals.swap(1, 2);
    c.cycle_points.swap(1, 2);
    let report = verify_tower(&t, 3);
    assert!(has(&report.failures, "cyclic", 2));
    assert!(!has(&report.failures, "cyclic", 3));
}

#[test]
fn tower_file_round_trip_still_verifies() {
    let t = tower(vec![2]);
    let text = serde_json::to_string(&t.to_file()).unwrap();
    let back = RefinementTower::from_file(serde_json::from_str(&text).unwrap()).unwrap();
    assert!(verify_tower(&back, 2).passed);
}
