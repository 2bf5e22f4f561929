//! Property tests for structural invariants: potential periodicity and well
//! structure, interaction antisymmetry, gap monotonicity, and positivity of
//! the exponent bookkeeping.

use disloc_core::{
    theta_exponent, two_body_gap, velocity, FracOrder, ParticleState, PotentialSpec, StressField,
};
use proptest::prelude::*;

fn coeff_sets() -> impl Strategy<Value = Vec<f64>> {
    // lead coefficient dominant keeps the series a valid multi-well potential
    (0.05f64..1.0, proptest::collection::vec(-0.01f64..0.01, 0..3))
        .prop_map(|(lead, rest)| {
            let mut v = vec![lead];
            v.extend(rest);
            v
        })
        .prop_filter("structural checks", |c| {
            PotentialSpec::user_cosine_series(c.clone()).is_ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_one_periodic(coeffs in coeff_sets(), x in -50.0f64..50.0, order in 0u32..4) {
        let p = PotentialSpec::user_cosine_series(coeffs).unwrap();
        let a = p.eval(x, order).unwrap();
        let b = p.eval(x + 1.0, order).unwrap();
        let scale = a.abs().max(1.0);
        prop_assert!((a - b).abs() < 1e-7 * scale, "period defect {} at x = {x}", (a - b).abs());
    }

    #[test]
    fn potential_vanishes_only_at_wells(coeffs in coeff_sets(), x in 1e-3f64..0.999) {
        let p = PotentialSpec::user_cosine_series(coeffs).unwrap();
        prop_assert!(p.eval(0.0, 0).unwrap().abs() < 1e-12);
        prop_assert!(p.eval(x.min(1.0 - 1e-3), 0).unwrap() > 0.0);
    }

    #[test]
    fn velocities_are_antisymmetric_under_mirroring(
        gaps in proptest::collection::vec(0.5f64..5.0, 1..5),
        s in 0.05f64..0.45,
        gamma in 0.1f64..5.0,
    ) {
        // positions and their mirror image: velocities must mirror with a sign
        // flip when the applied stress vanishes
        let mut pos = vec![0.0];
        for g in &gaps {
            pos.push(pos.last().unwrap() + g);
        }
        let mirrored: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
        let s = FracOrder::new_model(s).unwrap();
        let sigma = StressField::zero();
        let st = ParticleState { time: 0.0, positions: pos, s, gamma, delta: 0.0 };
        let sm = ParticleState { time: 0.0, positions: mirrored, s, gamma, delta: 0.0 };
        let v = velocity(&st, &sigma).unwrap();
        let vm = velocity(&sm, &sigma).unwrap();
        for (i, (a, b)) in v.iter().zip(vm.iter().rev()).enumerate() {
            prop_assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()), "index {i}: {a} vs {b}");
        }
    }

    #[test]
    fn two_body_gap_grows_and_respects_order(
        g0 in 0.1f64..10.0,
        s in 0.05f64..0.45,
        gamma in 0.1f64..5.0,
        t in 0.0f64..100.0,
        dt in 1e-6f64..10.0,
    ) {
        let a = two_body_gap(g0, s, gamma, t);
        let b = two_body_gap(g0, s, gamma, t + dt);
        prop_assert!(a >= g0);
        prop_assert!(b > a, "gap not increasing: {a} then {b}");
    }

    #[test]
    fn theta_exponent_in_valid_band(s in 0.01f64..0.49) {
        let s = FracOrder::new_model(s).unwrap();
        let th = theta_exponent(s).unwrap();
        // the corrected decay rate is strictly faster than the leading 2s rate
        // and never exceeds the derivative rate 1 + 2s
        prop_assert!(th > 2.0 * s.s - 1e-12, "theta {th} not past 2s at s = {}", s.s);
        prop_assert!(th <= 1.0 + 2.0 * s.s + 1e-12);
    }
}
