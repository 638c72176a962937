use approx::assert_abs_diff_eq;
use hypersub::charts::{self, ConeSide, HyperbolicConstants, PlGraph};
use hypersub::orbits;
use hypersub::systems::{self, DynamicalSystem, Word};
use proptest::prelude::*;

fn unit_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| [a, b])
}

#[test]
fn words_round_trip_and_reject_forbidden_factor() {
    let w = Word::parse("01001").unwrap();
    assert_eq!(w.to_string(), "01001");
    assert_eq!(w.shift().to_string(), "10010");
    assert!(Word::parse("0110").is_err());
    assert!(Word::parse("01a").is_err());
    assert_eq!(w.dist(&w), 0.0);
    assert_eq!(w.dist(&Word::parse("01000").unwrap()), 0.0625);
}

#[test]
fn admissible_word_counts_are_fibonacci() {
    let counts: Vec<usize> = (1..=10).map(|d| systems::golden_mean_words(d).len()).collect();
    assert_eq!(counts, vec![2, 3, 5, 8, 13, 21, 34, 55, 89, 144]);
}

#[test]
fn system_ids_parse_and_print() {
    assert_eq!(DynamicalSystem::parse("cat").unwrap().id(), "cat");
    assert_eq!(DynamicalSystem::parse("gms:7").unwrap().depth(), Some(7));
    assert!(DynamicalSystem::parse("pcat:1e-3:1").unwrap().is_torus());
    for bad in ["", "torus", "gms", "gms:1", "gms:x", "pcat:1e-3", "pcat:-1:0", "pcat:1:0"] {
        assert!(DynamicalSystem::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn cat_map_stretches_unstable_direction_by_lambda_u() {
    let cat = systems::cat_map();
    let x = [0.31, 0.77];
    for (coords, factor) in [([1e-4, 0.0], systems::lambda_u()), ([0.0, 1e-4], systems::lambda_s())] {
        let y = systems::reduce(hypersub::linalg::add(x, systems::from_eigen(coords)));
        let d0 = systems::torus_dist(x, y);
        let d1 = systems::torus_dist(cat.map_torus(x), cat.map_torus(y));
        assert_abs_diff_eq!(d1 / d0, factor, epsilon = 1e-8);
    }
}

#[test]
fn coscos_lipschitz_constant_dominates_sampled_quotients() {
    let cat = systems::cat_map();
    let phi = systems::observable_library("coscos", &cat).unwrap();
    assert_abs_diff_eq!(phi.lip, 8.648, epsilon = 1e-3);
    // the unit-ball corner with the largest first coordinate
    let corner = [[1.0, 1.0], [1.0, -1.0]].into_iter().map(systems::from_eigen).max_by(|a, b| a[0].abs().total_cmp(&b[0].abs())).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..2000 {
        let t = i as f64 / 2000.0;
        let x = [t, 0.5 * t];
        let y = systems::reduce(hypersub::linalg::add(x, hypersub::linalg::scale(corner, 1e-6)));
        worst = worst.max((phi.eval_torus(x) - phi.eval_torus(y)).abs() / systems::torus_dist(x, y));
    }
    assert!(worst <= phi.lip * (1.0 + 1e-9));
    assert!(worst >= 0.9 * phi.lip, "sampled quotient {worst}");
}

#[test]
fn observables_check_their_system() {
    let cat = systems::cat_map();
    let gms = DynamicalSystem::parse("gms:6").unwrap();
    assert!(systems::observable_library("edgecost:default", &cat).is_err());
    assert!(systems::observable_library("coscos", &gms).is_err());
    assert!(systems::observable_library("nonsense", &cat).is_err());
    let shifted = systems::observable_library("coscos-0.5", &cat).unwrap();
    assert_eq!(shifted.eval_torus([0.0, 0.0]), -0.5);
    let e = systems::observable_library("edgecost:default", &gms).unwrap();
    assert_abs_diff_eq!(e.lip, 0.6, epsilon = 1e-15);
    assert_eq!(e.eval_word(&Word::parse("100000").unwrap()), 0.1);
}

#[test]
fn constants_reject_infeasible_inputs() {
    assert!(HyperbolicConstants::new(2.6, 1.2, 0.01, 0.05).is_err());
    assert!(HyperbolicConstants::new(0.9, 0.39, 0.01, 0.05).is_err());
    assert!(HyperbolicConstants::new(2.6, 0.39, 0.2, 0.05).is_err());
    assert!(HyperbolicConstants::new(2.6, 0.39, 0.01, 1.5).is_err());
    let c = HyperbolicConstants::cat_defaults();
    assert_abs_diff_eq!(c.contraction(), 0.41, epsilon = 1e-15);
    assert!(c.check_shadowing_eta().is_ok());
    assert!(c.beta(c.alpha) < c.alpha);
}

#[test]
fn cones_are_closed() {
    assert!(charts::cone_membership([1.0, 0.5], ConeSide::Unstable, 0.5));
    assert!(!charts::cone_membership([1.0, 0.6], ConeSide::Unstable, 0.5));
    assert!(charts::cone_membership([0.5, 1.0], ConeSide::Stable, 0.5));
    assert!(charts::cone_membership([0.0, 0.0], ConeSide::Stable, 0.0));
}

#[test]
fn piecewise_linear_graph_reproduces_lines() {
    let g = PlGraph::from_fn(0.05, 16, |u| 0.2 * u - 0.001);
    assert_abs_diff_eq!(g.slope(), 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(g.eval(0.0123), 0.2 * 0.0123 - 0.001, epsilon = 1e-15);
    assert_abs_diff_eq!(g.height(), 0.001, epsilon = 1e-15);
    assert!(g.certify(0.25).is_ok());
    assert!(g.certify(0.1).is_err());
    assert!(PlGraph::constant(0.05, 4, 0.03).certify(1.0).is_err());
}

#[test]
fn periodic_orbits_are_exact() {
    let cat = systems::cat_map();
    for n in 1..=7 {
        let orbits = orbits::periodic_points(&cat, n).unwrap();
        let total: usize = orbits.iter().map(|o| o.period()).sum();
        assert_eq!(total as i128, orbits::periodic_point_count(n).unwrap());
        assert!(orbits.iter().all(|o| o.verify()));
    }
}

#[test]
fn coscos_minimum_is_attained_at_the_fixed_point() {
    let cat = systems::cat_map();
    let phi = systems::observable_library("coscos", &cat).unwrap();
    let (est, _) = orbits::birkhoff_min_periodic(&cat, &phi, 4).unwrap();
    assert_eq!(est.value, 0.0);
}

fn edge_list(n: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    proptest::collection::vec((0..n, 0..n, -1.0..1.0f64), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn torus_metric_axioms(x in unit_point(), y in unit_point(), z in unit_point(), k0 in -3i32..3, k1 in -3i32..3) {
        let d = systems::torus_dist;
        prop_assert!((d(x, y) - d(y, x)).abs() <= 1e-15);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-15);
        prop_assert!(d(x, y) <= systems::torus_covering_radius() + 1e-12);
        let shifted = [x[0] + k0 as f64, x[1] + k1 as f64];
        prop_assert!(d(shifted, y) - d(x, y) <= 1e-12 && d(x, y) - d(shifted, y) <= 1e-12);
    }

    #[test]
    fn preimage_inverts_the_map(x in unit_point()) {
        for id in ["cat", "pcat:1e-3:1"] {
            let sys = DynamicalSystem::parse(id).unwrap();
            prop_assert!(systems::torus_dist(sys.preimage(sys.map_torus(x)), x) <= 1e-12);
        }
    }

    #[test]
    fn karp_matches_exhaustive_cycle_search(n in 1usize..5, edges in edge_list(4)) {
        let edges: Vec<_> = edges.into_iter().filter(|e| e.0 < n && e.1 < n).collect();
        let fast = orbits::karp(n, &edges);
        let slow = orbits::exhaustive_min_cycle_mean(n, &edges);
        prop_assert_eq!(fast.is_some(), slow.is_some());
        if let (Some((a, cyc)), Some((b, _))) = (fast, slow) {
            prop_assert!((a - b).abs() <= 1e-12, "karp {} exhaustive {}", a, b);
            let total: f64 = (0..cyc.len()).map(|i| {
                let (s, t) = (cyc[i], cyc[(i + 1) % cyc.len()]);
                edges.iter().filter(|e| e.0 == s && e.1 == t).map(|e| e.2).fold(f64::INFINITY, f64::min)
            }).sum();
            prop_assert!((total / cyc.len() as f64 - a).abs() <= 1e-12);
        }
    }
}
