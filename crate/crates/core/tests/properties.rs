use proptest::prelude::*;

use newton_odometer_core::fixtures::{two_cycle_model, TWO_CYCLE_MEMBERS};
use newton_odometer_core::newton_dynamics::{
    classify, contraction_certificate, eta_closed_form, newton_step, verify_halving, HalvingOutcome, StepResult,
    TrajectoryOutcome,
};
use newton_odometer_core::odometer::{
    add_digits, add_one_digits, conjugate_up_to_depth, decode_u64, encode_u64, m_alpha_profile, orbit_cylinder_check,
    AlphaSequence, Conjugacy, CylinderCheck,
};
use newton_odometer_core::poly::Poly;
use newton_odometer_core::pw_model::{certify_nice, Cell, PiecewiseModel};
use newton_odometer_core::synthesis::{
    admissible_radius, multiply_cycle_period, perturb_piece, retarget, CycleInterval, CyclicFamilyRef, PeriodParams,
};
use newton_odometer_core::{q, ExactScalar};

fn scalar() -> impl Strategy<Value = ExactScalar> {
    (-10_000i64..10_000, 1i64..5_000).prop_map(|(n, d)| q(n, d))
}

fn alpha_entries(max_len: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(2u64..=6, 1..=max_len)
}

fn digits_for(alpha: &[u64]) -> Vec<std::ops::Range<u64>> {
    alpha.iter().map(|&a| 0..a).collect::<Vec<_>>()
}

fn modulus(alpha: &[u64]) -> u64 {
    alpha.iter().product()
}

proptest! {
    #[test]
    fn scalar_text_round_trip(x in scalar()) {
        let text = x.to_canonical_string();
        prop_assert!(text.contains('/'));
        prop_assert_eq!(text.parse::<ExactScalar>().unwrap(), x);
    }

    #[test]
    fn sup_bound_dominates_samples(
        coeffs in prop::collection::vec(-20i64..20, 1..6),
        lo in -4i64..0,
        width in 1i64..5,
        ts in prop::collection::vec(0i64..=64, 8),
    ) {
        let p = Poly::new(coeffs.into_iter().map(|c| q(c, 3)).collect());
        let (a, b) = (q(lo, 1), q(lo + width, 1));
        let bound = p.sup_abs_bound(&a, &b, &q(1, 1 << 20));
        for t in ts {
            let x = &a + &(&(&b - &a) * &q(t, 64));
            prop_assert!(p.eval(&x).abs() <= bound);
        }
    }

    #[test]
    fn add_one_matches_mixed_radix((alpha, x) in alpha_entries(6).prop_flat_map(|a| { let d = digits_for(&a); (Just(a), d) })) {
        let mut out = vec![0; alpha.len()];
        add_one_digits(&alpha, &x, &mut out);
        let expected = (encode_u64(&alpha, &x).unwrap() + 1) % modulus(&alpha);
        prop_assert_eq!(encode_u64(&alpha, &out).unwrap(), expected);
    }

    #[test]
    fn add_matches_mixed_radix((alpha, x, y) in alpha_entries(6).prop_flat_map(|a| { let d = digits_for(&a); (Just(a), d.clone(), d) })) {
        let mut out = vec![0; alpha.len()];
        add_digits(&alpha, &x, &y, &mut out);
        let m = modulus(&alpha);
        let expected = (encode_u64(&alpha, &x).unwrap() + encode_u64(&alpha, &y).unwrap()) % m;
        prop_assert_eq!(encode_u64(&alpha, &out).unwrap(), expected);
        let mut back = vec![0; alpha.len()];
        decode_u64(&alpha, expected, &mut back);
        prop_assert_eq!(back, out);
    }

    #[test]
    fn add_is_commutative_associative_with_identity(
        (alpha, x, y, z) in alpha_entries(5).prop_flat_map(|a| { let d = digits_for(&a); (Just(a), d.clone(), d.clone(), d) })
    ) {
        let n = alpha.len();
        let sum = |u: &[u64], v: &[u64]| { let mut o = vec![0; n]; add_digits(&alpha, u, v, &mut o); o };
        prop_assert_eq!(sum(&x, &y), sum(&y, &x));
        prop_assert_eq!(sum(&sum(&x, &y), &z), sum(&x, &sum(&y, &z)));
        prop_assert_eq!(sum(&x, &vec![0; n]), x.clone());
    }

    #[test]
    fn profile_is_additive_under_concatenation(a in alpha_entries(8), b in alpha_entries(8)) {
        let joined: Vec<u64> = a.iter().chain(&b).copied().collect();
        let pa = m_alpha_profile(&AlphaSequence::new(a).unwrap(), 13);
        let pb = m_alpha_profile(&AlphaSequence::new(b).unwrap(), 13);
        let pj = m_alpha_profile(&AlphaSequence::new(joined).unwrap(), 13);
        for p in [2, 3, 5, 7, 11, 13] {
            prop_assert_eq!(pj.get(p), pa.get(p) + pb.get(p));
        }
    }

    #[test]
    fn conjugacy_is_reflexive_symmetric_and_order_free(a in alpha_entries(8), b in alpha_entries(8), rot in 0usize..8) {
        let sa = AlphaSequence::new(a.clone()).unwrap();
        let sb = AlphaSequence::new(b).unwrap();
        prop_assert_eq!(conjugate_up_to_depth(&sa, &sa, 13, None), Conjugacy::EqualProfile);
        let ab = conjugate_up_to_depth(&sa, &sb, 13, None);
        let ba = conjugate_up_to_depth(&sb, &sa, 13, None);
        match (&ab, &ba) {
            (Conjugacy::Differ { prime: p, valuations: (x, y) }, Conjugacy::Differ { prime: p2, valuations: (y2, x2) }) => {
                prop_assert_eq!((p, x, y), (p2, x2, y2));
            }
            _ => prop_assert_eq!(&ab, &ba),
        }
        let mut rotated = a.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        let sr = AlphaSequence::new(rotated).unwrap();
        prop_assert_eq!(conjugate_up_to_depth(&sa, &sr, 13, None), Conjugacy::EqualProfile);
    }

    #[test]
    fn orbit_visits_every_cylinder(a in alpha_entries(4)) {
        let k = a.len();
        let states = modulus(&a);
        let alpha = AlphaSequence::new(a).unwrap();
        prop_assert_eq!(orbit_cylinder_check(&alpha, k, 1 << 16).unwrap(), CylinderCheck::Pass { states });
    }

    #[test]
    fn two_cycle_members_are_periodic(n in 1i64..1000, right in any::<bool>()) {
        let g = two_cycle_model();
        let family = certify_nice(&g, &TWO_CYCLE_MEMBERS).unwrap();
        let x = if right { q(2, 1) + q(n, 1000) } else { q(n, 1000) };
        match classify(&g, &family, &x, 16) {
            TrajectoryOutcome::EventuallyPeriodic { period, cycle_points, .. } => {
                prop_assert_eq!(period, 2);
                // minimal: the tail does not repeat with period 1
                prop_assert_ne!(&cycle_points[0], &cycle_points[1]);
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn eta_bisection_brackets_closed_form(a_num in 1i64..40, eps_den in 6i64..100) {
        let a = q(a_num, 4);
        let m = PiecewiseModel::affine(q(1, 1), &newton_odometer_core::pw_model::Line::new(a, q(0, 1))).unwrap();
        let eps = q(1, eps_den);
        let cert = contraction_certificate(&m, 0, &eps).unwrap();
        let exact = eta_closed_form(&m.pieces()[0], &eps);
        prop_assert!(cert.eta <= exact);
        prop_assert!(&exact - &cert.eta <= ExactScalar::pow2_recip(40));
    }

    #[test]
    fn perturbations_within_delta_halve(seed in any::<u64>(), xs in prop::collection::vec(-1000i64..=1000, 10)) {
        let m = newton_odometer_core::fixtures::single_root_model(1);
        let cert = contraction_certificate(&m, 0, &q(1, 10)).unwrap();
        let p = perturb_piece(&m, 0, &cert.delta, seed).unwrap();
        prop_assert!(p.d1_bound < cert.delta);
        let samples: Vec<ExactScalar> = xs.into_iter().map(|k| q(k, 1000)).collect();
        let out = verify_halving(&p.model, &cert, &samples).unwrap();
        prop_assert_eq!(out, HalvingOutcome::Pass { checked: 10 });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn retarget_is_local(xn in 1i64..8, frac in -99i64..100, dk in 4u32..8) {
        let g = two_cycle_model();
        let eps = q(1, 2);
        let r = admissible_radius(&g.pieces()[1], &eps).unwrap();
        let x = q(xn, 9);
        let y = q(5, 2) + &(&r * &q(frac, 100));
        let delta = ExactScalar::pow2_recip(dk).min((&x).min(&(q(1, 1) - &x)).clone() / q(2, 1));
        let res = retarget(&g, 1, &x, &y, &delta, &eps).unwrap();
        prop_assert_eq!(newton_step(&res.model, &x).unwrap(), StepResult::Next(y));
        prop_assert!(res.d1_bound < eps);
        let (lo, hi) = (&x - &delta, &x + &delta);
        for t in (-300i64..=300).map(|k| q(k, 100)) {
            if t <= lo || t >= hi {
                prop_assert_eq!(g.eval(&t).unwrap(), res.model.eval(&t).unwrap());
            }
        }
        let outside = |m: &PiecewiseModel| -> Vec<Cell> { m.cells().into_iter().filter(|c| c.lo() >= &q(1, 1)).collect() };
        prop_assert_eq!(outside(&g), outside(&res.model));
    }

    #[test]
    fn multiplied_period_is_exact(m in 1usize..5, seed in any::<u64>()) {
        let g = two_cycle_model();
        let family = certify_nice(&g, &TWO_CYCLE_MEMBERS).unwrap();
        let cycle = CyclicFamilyRef {
            intervals: vec![
                CycleInterval { piece_id: 1, lo: q(0, 1), hi: q(1, 1) },
                CycleInterval { piece_id: 2, lo: q(2, 1), hi: q(3, 1) },
            ],
            cycle_points: vec![q(1, 2), q(5, 2)],
        };
        let params = PeriodParams::new(q(1, 2), q(1, 100), seed);
        let out = multiply_cycle_period(&g, &family, &cycle, m, &q(1, 3), &params).unwrap();
        prop_assert!(out.measure_loss < q(1, 100));
        for &id in &out.refined_ids {
            let p = &out.model.pieces()[id];
            let x = p.lo.midpoint(&p.hi);
            prop_assert_eq!(classify(&out.model, &out.family, &x, 64).period(), Some(2 * m));
        }
    }
}
