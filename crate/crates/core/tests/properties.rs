use num_complex::Complex64;
use proptest::prelude::*;

use irsnoma_core::matching::{
    assign_channels, assignment_count, blocking_pairs, enumerate_assignments, AccessMode, UtilityContext,
};
use irsnoma_core::pipeline::{enumerate_orders, placement_gain_approx, water_fill};
use irsnoma_core::reflect_design::phi_lower_bound;
use irsnoma_core::scenario::{ascending_order, rates_from_gains, sic_feasible_from_gains, sample_channels};
use irsnoma_core::{Assignment, DecodingOrder, ReflectionVector, SystemConfig};

fn gains(n_channels: usize, n_users: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(1e-11f64..1e-8, n_users), n_channels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn water_fill_spends_budget_at_one_level(
        floors in prop::collection::vec(1e-3f64..2.0, 1..8),
        budget in 1e-3f64..5.0,
    ) {
        let p = water_fill(&floors, budget);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-9 * (1.0 + budget));
        let level: Vec<f64> = p.iter().zip(&floors).filter(|(p, _)| **p > 0.0).map(|(p, f)| p + f).collect();
        for w in level.windows(2) {
            prop_assert!((w[0] - w[1]).abs() <= 1e-9 * (1.0 + w[0]));
        }
        // Inactive slots sit above the water level.
        if let Some(&mu) = level.first() {
            for (x, f) in p.iter().zip(&floors) {
                if *x == 0.0 {
                    prop_assert!(*f >= mu - 1e-9);
                }
            }
        }
    }

    #[test]
    fn clamping_keeps_entries_in_unit_disc(
        parts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..16),
    ) {
        let e = ReflectionVector::clamped(parts.iter().map(|&(a, b)| Complex64::new(a, b)).collect());
        prop_assert!(e.max_modulus() <= 1.0 + 1e-12);
        for (x, &(a, b)) in e.as_slice().iter().zip(&parts) {
            if a.hypot(b) <= 1.0 {
                prop_assert_eq!(*x, Complex64::new(a, b));
            }
        }
    }

    #[test]
    fn tangent_plane_never_exceeds_gain(k in -5.0f64..5.0, x in -5.0f64..5.0, kl in -5.0f64..5.0, xl in -5.0f64..5.0) {
        prop_assert!(phi_lower_bound(k, x, kl, xl) <= k * k + x * x + 1e-9);
    }

    #[test]
    fn matching_is_stable_and_monotone(g in gains(2, 4), oma in any::<bool>()) {
        let mode = if oma { AccessMode::Oma } else { AccessMode::Noma };
        let ctx = UtilityContext::from_gains(g, 1e-11, 0.01, mode);
        let m = assign_channels(&ctx, 2, 1e-9).unwrap();
        m.check_consistency(2).unwrap();
        prop_assert!(m.unmatched().is_empty());
        prop_assert!(blocking_pairs(&m, &ctx, 1e-9).is_empty());
        for w in m.utility_trace.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn larger_matching_instances_terminate_stable(g in gains(3, 6)) {
        let ctx = UtilityContext::from_gains(g, 1e-11, 0.005, AccessMode::Noma);
        let m = assign_channels(&ctx, 2, 1e-9).unwrap();
        prop_assert!(blocking_pairs(&m, &ctx, 1e-9).is_empty());
        prop_assert!(m.swaps <= 16 * 36);
    }

    #[test]
    fn ascending_order_is_sic_consistent(g in gains(2, 4)) {
        let a = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let order = ascending_order(&g, a.channels());
        prop_assert!(sic_feasible_from_gains(&g, &order, 0.0));
        order.validate_against(&a).unwrap();
    }

    #[test]
    fn rates_are_nonnegative_and_strongest_user_is_interference_free(
        g in gains(1, 3),
        p in prop::collection::vec(0.0f64..0.1, 3),
    ) {
        let order = DecodingOrder::new(vec![vec![2, 0, 1]]);
        let r = rates_from_gains(&g, &order, &vec![p.clone()], 1e-11);
        prop_assert!(r[0].iter().all(|&x| x >= 0.0));
        let last = (1.0 + p[1] * g[0][1] / 1e-11).log2();
        prop_assert!((r[0][1] - last).abs() <= 1e-9 * (1.0 + last));
    }

    #[test]
    fn placement_is_symmetric(d in 0.5f64..49.5) {
        let a = placement_gain_approx(d, 50.0, 2.5, 3.0).unwrap();
        let b = placement_gain_approx(50.0 - d, 50.0, 2.5, 3.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
        prop_assert!(a >= placement_gain_approx(25.0, 50.0, 2.5, 3.0).unwrap() * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn enumeration_matches_count(users in 1usize..6, channels in 1usize..4, cap in 1usize..4) {
        prop_assume!(users <= channels * cap);
        let all = enumerate_assignments(users, channels, cap, 1_000_000).unwrap();
        prop_assert_eq!(all.len() as u128, assignment_count(users, channels, cap));
        for a in &all {
            prop_assert_eq!(a.n_assigned(), users);
            prop_assert!(a.channels().iter().all(|c| c.len() <= cap));
        }
        let mut keys: Vec<Vec<Vec<usize>>> = all.iter().map(|a| a.channels().to_vec()).collect();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), all.len());
    }

    #[test]
    fn realizations_are_reproducible(seed in any::<u64>(), m in 0usize..6) {
        let cfg = SystemConfig { n_elements: m, ..SystemConfig::default() };
        let a = sample_channels(&cfg, seed).unwrap();
        let b = sample_channels(&cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.f[0].len(), m);
    }

    #[test]
    fn order_enumeration_is_product_of_factorials(sizes in prop::collection::vec(1usize..4, 1..4)) {
        let mut next = 0;
        let channels: Vec<Vec<usize>> = sizes.iter().map(|&s| { let c = (next..next + s).collect(); next += s; c }).collect();
        let a = Assignment::new(channels, next).unwrap();
        let orders = enumerate_orders(&a, 10_000).unwrap();
        let expected: usize = sizes.iter().map(|&s| (1..=s).product::<usize>()).product();
        prop_assert_eq!(orders.len(), expected);
        for o in &orders {
            o.validate_against(&a).unwrap();
        }
    }
}
