//! Property tests for meshes, measures, active sets and the reduction.

use std::sync::Arc;

use multilevel_ot::active_set::{activate, complete_feasible, multilevel_solve, north_west_support, MultilevelParams};
use multilevel_ot::cli::random_instance;
use multilevel_ot::measure::discretize_density;
use multilevel_ot::mesh::{build_mesh, interpolate_nodal, prolongate, refine, BoxRegion, Domain, Point};
use multilevel_ot::problems::make_problem;
use multilevel_ot::transport::{assemble, solve_reduced, ActiveSet, CostFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn domains() -> Vec<Domain> {
    ["ex1", "ex2", "ex3", "ex4"]
        .iter()
        .flat_map(|n| {
            let p = make_problem(n).unwrap();
            [p.domain_x, p.domain_y]
        })
        .collect()
}

#[test]
fn partition_of_unity_and_nesting() {
    for d in domains() {
        let first = if d.boxes().iter().any(|b| b.upper[0] - b.lower[0] < 1.0) { 1 } else { 0 };
        let mut mesh = build_mesh(&d, first).unwrap();
        for _ in 0..4 {
            let total: f64 = mesh.hat_integrals().iter().sum();
            assert!((total - d.measure()).abs() <= 1e-12 * d.measure());
            let fine = refine(&mesh);
            assert!((fine.h() - mesh.h() / 2.0).abs() < 1e-15);
            for x in mesh.nodes() {
                assert!(fine.nodes().contains(x));
            }
            mesh = fine;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prolongation_reproduces_affine_functions(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, level in 0u32..4) {
        let d = Domain::new(2, vec![
            BoxRegion::new([0.0, 0.0], [2.0, 1.0]),
            BoxRegion::new([3.0, -1.0], [4.0, 1.0]),
        ]).unwrap();
        let f = |x: &Point| a * x[0] + b * x[1] + c;
        let coarse = build_mesh(&d, level).unwrap();
        let fine = refine(&coarse);
        let up = prolongate(&coarse, &fine, &interpolate_nodal(&coarse, f)).unwrap();
        for (u, v) in up.iter().zip(interpolate_nodal(&fine, f)) {
            prop_assert!((u - v).abs() <= 1e-14 * (1.0 + v.abs()) * 10.0);
        }
    }

    #[test]
    fn discrete_measures_are_probabilities(level in 1u32..5, k in 0usize..4) {
        let name = ["ex1", "ex2", "ex3", "ex4"][k];
        let p = make_problem(name).unwrap();
        let mesh = Arc::new(build_mesh(&p.domain_x, level).unwrap());
        let f = p.density_f.clone();
        let mu = discretize_density(mesh.clone(), |x| f(x)).unwrap();
        prop_assert!(mu.weights().iter().all(|w| *w >= 0.0));
        prop_assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        // adjoint identity: pairing equals vertex quadrature of f times u
        let u = |x: &Point| (x[0] * 3.0).sin() + x[1] * x[1];
        let quad: f64 = mesh.nodes().iter().zip(mesh.hat_integrals())
            .map(|(x, beta)| beta * f(x) * u(x)).sum();
        prop_assert!((mu.pair(u) - quad / mu.raw_mass()).abs() <= 1e-12);
    }

    #[test]
    fn activation_is_monotone_in_the_threshold(seed in any::<u64>(), t1 in 0.0f64..0.3, dt in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Point> = (0..7).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let ys: Vec<Point> = (0..6).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let phi: Vec<f64> = (0..7).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let psi: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let c = CostFunction::polynomial(2.0);
        let small = activate(&phi, &psi, &c, &xs, &ys, t1);
        let large = activate(&phi, &psi, &c, &xs, &ys, t1 + dt);
        prop_assert!(small.is_subset(&large));
        prop_assert!(large.pairs().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn completion_is_always_feasible(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu, costs) = random_instance(&mut rng, m, n);
        let nw = north_west_support(&mu, &nu);
        prop_assert!(nw.len() < m + n);
        let keep: Vec<(usize, usize)> = ActiveSet::full(m, n).pairs().iter().copied()
            .filter(|_| rng.gen_bool(0.2)).collect();
        let a = complete_feasible(&ActiveSet::new(keep), &mu, &nu);
        let sub: Vec<f64> = a.pairs().iter().map(|&(i, j)| costs[i * n + j]).collect();
        prop_assert!(solve_reduced(&sub, &mu, &nu, &a).unwrap().is_optimal());
    }

    /// Perturbing each exact multiplier by at most `eps` and activating with
    /// threshold `2 eps` keeps an optimal plan.
    #[test]
    fn reduction_is_exact(seed in any::<u64>(), m in 2usize..7, n in 2usize..7, big in any::<bool>()) {
        let eps = if big { 1e-2 } else { 1e-3 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu, _) = random_instance(&mut rng, m, n);
        let xs: Vec<Point> = (0..m).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let ys: Vec<Point> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let c = CostFunction::polynomial(2.0);
        let full = ActiveSet::full(m, n);
        let costs: Vec<f64> = full.pairs().iter().map(|&(i, j)| c.eval(&xs[i], &ys[j])).collect();
        let exact = solve_reduced(&costs, &mu, &nu, &full).unwrap();
        let phi: Vec<f64> = exact.phi.iter().map(|v| v + rng.gen_range(-eps..=eps)).collect();
        let psi: Vec<f64> = exact.psi.iter().map(|v| v + rng.gen_range(-eps..=eps)).collect();
        let a = complete_feasible(&activate(&phi, &psi, &c, &xs, &ys, 2.0 * eps), &mu, &nu);
        let sub: Vec<f64> = a.pairs().iter().map(|&(i, j)| c.eval(&xs[i], &ys[j])).collect();
        let reduced = solve_reduced(&sub, &mu, &nu, &a).unwrap();
        prop_assert!((reduced.objective - exact.objective).abs() <= 1e-9);
    }
}

#[test]
fn assembly_follows_active_order() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let m = build_mesh(&d, 2).unwrap();
    let a = ActiveSet::new(vec![(4, 0), (0, 4), (2, 2)]);
    let c = assemble(&m, &m, &CostFunction::polynomial(2.0), &a);
    assert_eq!(c, vec![0.5, 0.0, 0.5]);
}

#[test]
fn final_level_satisfies_the_relaxed_certificate() {
    for (name, p) in [("ex2", 2.0), ("ex3", 1.5), ("ex4", 3.0)] {
        let problem = make_problem(name).unwrap();
        let c = CostFunction::polynomial(p);
        let levels = multilevel_solve(&problem, &c, &MultilevelParams::with_levels(2, 4)).unwrap();
        let last = levels.last().unwrap();
        let h = last.mesh_x.h().max(last.mesh_y.h());
        let tol = h * h;
        let (phi, psi) = (&last.solution.phi, &last.solution.psi);
        let mut worst = 0.0f64;
        for (i, x) in last.mesh_x.nodes().iter().enumerate() {
            for (j, y) in last.mesh_y.nodes().iter().enumerate() {
                worst = worst.max(phi[i] + psi[j] - c.eval(x, y));
            }
        }
        assert!(worst <= tol, "{name}: violation {worst} above {tol}");
        for e in &last.solution.plan {
            let gap = c.eval(&last.mesh_x.nodes()[e.row], &last.mesh_y.nodes()[e.col]) - phi[e.row] - psi[e.col];
            assert!(gap.abs() <= 1e-9);
        }
    }
}
