//! The network simplex against exhaustive enumeration of bases.

mod common;

use common::{brute_force_optimum, count_spanning_trees};
use multilevel_ot::cli::{certificate_violations, random_instance};
use multilevel_ot::transport::{solve_reduced, solve_reduced_with, ActiveSet, PivotRule, SolverOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn enumeration_visits_every_spanning_tree() {
    for m in 1..=4usize {
        for n in 1..=4usize {
            let expected = (m as u64).pow(n as u32 - 1) * (n as u64).pow(m as u32 - 1);
            assert_eq!(count_spanning_trees(m, n), expected, "K_{m},{n}");
        }
    }
    assert_eq!(count_spanning_trees(3, 6), 3u64.pow(5) * 6u64.pow(2));
}

#[test]
fn enumeration_on_hand_solved_instances() {
    // points 0 and 1 on a line, quadratic cost
    let costs = [0.0, 0.5, 0.5, 0.0];
    assert!((brute_force_optimum(&costs, &[0.3, 0.7], &[0.6, 0.4]) - 0.15).abs() < 1e-15);
    assert_eq!(brute_force_optimum(&[2.0], &[1.0], &[1.0]), 2.0);
    // a single row has only one feasible plan
    let v = brute_force_optimum(&[1.0, 2.0, 3.0], &[1.0], &[0.2, 0.3, 0.5]);
    assert!((v - (0.2 + 0.6 + 1.5)).abs() < 1e-15);
    // assignment: anti-diagonal is cheapest
    let v = brute_force_optimum(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.5], &[0.5, 0.5]);
    assert_eq!(v, 0.0);
}

#[test]
fn simplex_matches_enumeration_on_seeded_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let m = rand::Rng::gen_range(&mut rng, 1..=5);
        let n = rand::Rng::gen_range(&mut rng, 1..=5);
        let (mu, nu, costs) = random_instance(&mut rng, m, n);
        let full = ActiveSet::full(m, n);
        let s = solve_reduced(&costs, &mu, &nu, &full).unwrap();
        let brute = brute_force_optimum(&costs, &mu, &nu);
        assert!((s.objective - brute).abs() <= 1e-10, "{} vs {brute}", s.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pivot_rules_agree(seed in any::<u64>(), m in 1usize..=6, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu, costs) = random_instance(&mut rng, m, n);
        let full = ActiveSet::full(m, n);
        let block = solve_reduced(&costs, &mu, &nu, &full).unwrap();
        let opts = SolverOptions { pivot_rule: PivotRule::Dantzig, ..SolverOptions::default() };
        let dantzig = solve_reduced_with(&costs, &mu, &nu, &full, &opts).unwrap();
        prop_assert!((block.objective - dantzig.objective).abs() <= 1e-12);
        for s in [&block, &dantzig] {
            let bad = certificate_violations(&costs, &mu, &nu, &full, s, 1e-9);
            prop_assert!(bad.is_empty(), "{:?}", bad);
        }
    }

    #[test]
    fn centering_keeps_the_certificate(seed in any::<u64>(), m in 1usize..=6, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu, costs) = random_instance(&mut rng, m, n);
        let full = ActiveSet::full(m, n);
        let basic = SolverOptions { center_duals: false, ..SolverOptions::default() };
        let a = solve_reduced_with(&costs, &mu, &nu, &full, &basic).unwrap();
        let b = solve_reduced(&costs, &mu, &nu, &full).unwrap();
        prop_assert_eq!(&a.plan, &b.plan);
        prop_assert!((a.dual_objective(&mu, &nu) - b.dual_objective(&mu, &nu)).abs() <= 1e-12);
        prop_assert!(certificate_violations(&costs, &mu, &nu, &full, &b, 1e-9).is_empty());
    }
}
