use irsnoma_core::matching::{assign_channels, init_matching, is_swap_blocking, AccessMode, UtilityContext};
use irsnoma_core::pipeline::{
    exhaustive_assignment, exhaustive_joint, exhaustive_order, placement_gain_approx, run, three_step, water_fill,
};
use irsnoma_core::power_alloc::{find_feasible, optimize_power};
use irsnoma_core::reflect_design::optimize_reflection;
use irsnoma_core::scenario::{gain_matrix, rates, sample_channels, sic_feasible, sum_rate};
use irsnoma_core::{Algorithm, Assignment, DecodingOrder, Error, ReflectionVector, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn two_by_two_proposals_match_permutation_oracle() {
    // user 0 prefers channel 0 (3 > 1), user 1 prefers channel 1 (5 > 2)
    let gains = vec![vec![3.0, 2.0], vec![1.0, 5.0]];
    let ctx = UtilityContext::from_gains(gains.clone(), 1.0, 1.0, AccessMode::Noma);
    let m = init_matching(&ctx, 1).unwrap();
    let best = [(0usize, 1usize), (1, 0)]
        .into_iter()
        .max_by(|a, b| (gains[a.0][0] + gains[a.1][1]).total_cmp(&(gains[b.0][0] + gains[b.1][1])))
        .unwrap();
    assert_eq!((m.channel_of(0), m.channel_of(1)), (Some(best.0), Some(best.1)));
}

#[test]
fn single_channel_accepts_everyone_within_capacity() {
    let ctx = UtilityContext::from_gains(vec![vec![1.0, 4.0, 2.0, 3.0]], 1.0, 1.0, AccessMode::Noma);
    let m = init_matching(&ctx, 4).unwrap();
    assert_eq!(m.users(0), &[0, 1, 2, 3]);
    assert_eq!(m.proposal_rounds, 1);
    // More users than seats cannot all be placed.
    assert!(matches!(init_matching(&ctx, 2), Err(Error::Domain(_))));
    assert_eq!(m.rejected_users[0], Vec::<usize>::new());
}

#[test]
fn crossing_swap_is_blocking_and_applied() {
    // Users 0 and 1 are each far stronger on the channel they do not hold.
    let gains = vec![vec![1.0, 9.0, 4.0, 0.0], vec![9.0, 1.0, 0.0, 4.0]];
    let ctx = UtilityContext::from_gains(gains, 1.0, 1.0, AccessMode::Oma);
    let mut m = init_matching(&ctx, 2).unwrap();
    // Proposals already uncrossed: then no swap back can be blocking.
    if m.channel_of(0) == Some(1) {
        assert!(!is_swap_blocking(&m, 0, 1, &ctx, 1e-9).unwrap());
        return;
    }
    assert!(is_swap_blocking(&m, 0, 1, &ctx, 1e-9).unwrap());
    m = assign_channels(&ctx, 2, 1e-9).unwrap();
    assert_eq!(m.channel_of(0), Some(1));
}

#[test]
fn same_channel_pair_is_a_domain_error() {
    let ctx = UtilityContext::from_gains(vec![vec![1.0, 2.0], vec![0.5, 0.5]], 1.0, 1.0, AccessMode::Noma);
    let m = init_matching(&ctx, 2).unwrap();
    let (a, b) = (0, 1);
    assert_eq!(m.channel_of(a), m.channel_of(b));
    assert!(matches!(is_swap_blocking(&m, a, b, &ctx, 1e-9), Err(Error::Domain(_))));
}

#[test]
fn water_fill_two_slot_closed_form() {
    // floors 0.25 and 1.0, budget 1: level 1.125
    let p = water_fill(&[0.25, 1.0], 1.0);
    assert!((p[0] - 0.875).abs() < 1e-12 && (p[1] - 0.125).abs() < 1e-12);
    let p = water_fill(&[0.1, 5.0], 1.0);
    assert_eq!(p[1], 0.0);
    assert!((p[0] - 1.0).abs() < 1e-12);
}

#[test]
fn placement_values() {
    let at = |d: f64| 1e-6 * (d * (50.0 - d)).powf(-2.5) + 1e-3 * 50f64.powf(-3.0);
    for d in [10.0, 25.0, 45.0] {
        let v = placement_gain_approx(d, 50.0, 2.5, 3.0).unwrap();
        assert!((v - at(d)).abs() <= 1e-15 * v);
    }
    assert!(placement_gain_approx(10.0, 50.0, 2.5, 3.0).unwrap() > placement_gain_approx(25.0, 50.0, 2.5, 3.0).unwrap());
    assert!(placement_gain_approx(0.0, 50.0, 2.5, 3.0).is_err());
    assert!(placement_gain_approx(50.0, 50.0, 2.5, 3.0).is_err());
}

#[test]
fn power_loop_beats_its_feasible_start_and_respects_budget() {
    let config = SystemConfig::default();
    for seed in 0..5 {
        let chan = sample_channels(&config, seed).unwrap();
        let e = ReflectionVector::ones(config.n_elements);
        let order = irsnoma_core::scenario::ascending_order(&gain_matrix(&chan, &e), &[vec![0, 1], vec![2, 3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = find_feasible(&chan, &order, &e, &config, &mut rng).unwrap();
        let st = optimize_power(&chan, &order, &e, &init, &config).unwrap();
        assert!(st.objective() >= init.objective());
        assert!(st.total_power() <= config.p_max * (1.0 + 1e-6));
        // The surrogate never overstates the achieved rates.
        let achieved = sum_rate(&rates(&chan, &order, &st.p, &e));
        assert!(achieved >= st.objective() - 1e-6, "{achieved} {}", st.objective());
    }
}

#[test]
fn reflection_step_keeps_sinr_targets_and_order() {
    let config = SystemConfig::default();
    for seed in 0..5 {
        let chan = sample_channels(&config, seed).unwrap();
        let e = ReflectionVector::ones(config.n_elements);
        let order = irsnoma_core::scenario::ascending_order(&gain_matrix(&chan, &e), &[vec![0, 1], vec![2, 3]]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = find_feasible(&chan, &order, &e, &config, &mut rng).unwrap();
        let st = optimize_power(&chan, &order, &e, &init, &config).unwrap();
        let out = optimize_reflection(&chan, &order, &st.p, &st.chi, &e, &config).unwrap();
        assert!(out.e.max_modulus() <= 1.0 + 1e-12);
        if out.fallback {
            assert_eq!(out.e, e);
            continue;
        }
        assert!(sic_feasible(&chan, &order, &out.e, 0.0));
        let after = irsnoma_core::scenario::sinr_from_gains(&gain_matrix(&chan, &out.e), &order, &st.p, chan.noise_power);
        for n in 0..2 {
            for &k in order.channel(n) {
                assert!(after[n][k] >= st.chi[n][k] * (1.0 - 1e-6), "{} {}", after[n][k], st.chi[n][k]);
            }
        }
    }
}

#[test]
fn exhaustive_searches_dominate_three_step() {
    let config = SystemConfig::default();
    for seed in 0..3 {
        let chan = sample_channels(&config, seed).unwrap();
        let ts = three_step(&chan, &config).unwrap();
        let ex = exhaustive_assignment(&chan, &config, AccessMode::Noma).unwrap();
        let joint = exhaustive_joint(&chan, &config).unwrap();
        let (_, by_order) = exhaustive_order(&chan, &ts.assignment, &config).unwrap();
        assert!(ex.throughput >= ts.throughput - 1e-9);
        assert!(joint.throughput >= by_order.throughput - 1e-9);
        assert!(joint.feasible);
    }
}

#[test]
fn single_channel_exhaustive_equals_three_step() {
    let config = SystemConfig { n_channels: 1, n_users: 2, per_channel_cap: 2, total_bandwidth: 15e3, ..SystemConfig::default() };
    let chan = sample_channels(&config, 4).unwrap();
    let ts = three_step(&chan, &config).unwrap();
    let ex = exhaustive_assignment(&chan, &config, AccessMode::Noma).unwrap();
    assert_eq!(ts.assignment, ex.assignment);
    assert!((ts.throughput - ex.throughput).abs() <= 1e-9);
}

#[test]
fn search_caps_are_refused() {
    let config = SystemConfig { max_assignments: 5, ..SystemConfig::default() };
    let chan = sample_channels(&config, 0).unwrap();
    assert!(matches!(
        exhaustive_assignment(&chan, &config, AccessMode::Noma),
        Err(Error::SearchTooLarge { count: 6, cap: 5 })
    ));
    let config = SystemConfig { max_order_combinations: 3, ..SystemConfig::default() };
    let a = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
    assert!(matches!(exhaustive_order(&chan, &a, &config), Err(Error::SearchTooLarge { count: 4, cap: 3 })));
}

#[test]
fn every_algorithm_runs_and_reports_consistent_throughput() {
    let config = SystemConfig::default();
    let chan = sample_channels(&config, 1).unwrap();
    for a in Algorithm::ALL {
        let s = run(a, &chan, &config).unwrap();
        assert_eq!(s.algorithm, a);
        let total: f64 = s.rates.iter().flatten().sum();
        assert!((total - s.throughput).abs() <= 1e-9 * (1.0 + total));
        assert_eq!(s.outer_iterations + 1, s.trace.len());
        if matches!(a, Algorithm::NomaNoIrs | Algorithm::OmaNoIrs) {
            assert!(s.reflection.as_slice().iter().all(|x| x.norm() == 0.0));
        }
    }
}

#[test]
fn infeasible_order_is_reported_not_hidden() {
    let config = SystemConfig::default();
    let chan = sample_channels(&config, 0).unwrap();
    let e = ReflectionVector::zeros(config.n_elements);
    let g = gain_matrix(&chan, &e);
    // Put the stronger user first on channel 0.
    let (a, b) = if g[0][0] > g[0][1] { (0, 1) } else { (1, 0) };
    let order = DecodingOrder::new(vec![vec![a, b], vec![2, 3]]);
    let assignment = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
    let s = irsnoma_core::pipeline::solve_fixed_order(Algorithm::NomaNoIrs, &chan.without_irs(), &assignment, &order, &ReflectionVector::zeros(0), &config).unwrap();
    assert!(!s.feasible);
    assert!(s.note.is_some());
}
