use approx::assert_abs_diff_eq;
use hypersub::laxoleinik::*;
use hypersub::systems::{self, PhasePoint};
use hypersub::{orbits, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cat_problem(q: usize, obs: &str, phibar: f64, c: f64) -> LaxOleinikProblem {
    let sys = systems::cat_map();
    let phi = systems::observable_library(obs, &sys).unwrap();
    LaxOleinikProblem::new(Grid::torus(&sys, q).unwrap(), phi, phibar, c).unwrap()
}

fn shift_problem(phibar_offset: f64) -> LaxOleinikProblem {
    let sys = systems::golden_mean_shift(8).unwrap();
    let phi = systems::observable_library("edgecost:default", &sys).unwrap();
    let phibar = orbits::min_mean_cycle(&sys, &phi).unwrap().value;
    LaxOleinikProblem::new(Grid::words(&sys).unwrap(), phi, phibar + phibar_offset, 7.2).unwrap()
}

#[test]
fn toy_three_point_table() {
    // cost[i][j] written out; out[j] = min_i u[i] + cost[i][j]
    let cost = [[0.0, 2.0, 5.0], [1.0, 0.0, 1.0], [4.0, 3.0, 0.0]];
    let u = [0.0, 1.0, 3.0];
    let (out, arg) = min_plus_brute(&u, 3, |i, j| cost[i][j]);
    assert_eq!(out, vec![0.0, 1.0, 2.0]);
    assert_eq!(arg, vec![0, 1, 1]);
    let (out32, _) = min_plus_brute(&[0.0f32, 1.0, 3.0], 3, |i, j| cost[i][j] as f32);
    assert_eq!(out32, vec![0.0f32, 1.0, 2.0]);
}

#[test]
fn zero_observable_keeps_zero_fixed() {
    for q in [5, 16, 48] {
        let prob = cat_problem(q, "zero", 0.0, 3.0);
        let t = prob.apply_values(&vec![0.0; prob.len()]);
        assert!(t.iter().all(|&v| v == 0.0), "q = {q}");
    }
}

#[test]
fn constant_shift_is_additive() {
    let prob = cat_problem(12, "coscos", 0.0, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u: Vec<f64> = (0..prob.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let shifted: Vec<f64> = u.iter().map(|x| x + 3.7).collect();
    let a = prob.apply_values(&u);
    let b = prob.apply_values(&shifted);
    for (x, y) in a.iter().zip(&b) {
        assert_abs_diff_eq!(x + 3.7, *y, epsilon = 1e-12);
    }
}

#[test]
fn sweep_matches_brute_force_on_cat_grid() {
    for q in [7, 16, 33] {
        let brute = cat_problem(q, "coscos:0.25", 0.1, 9.0).with_engine(Engine::Brute);
        let sweep = cat_problem(q, "coscos:0.25", 0.1, 9.0).with_engine(Engine::Sweep);
        let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
        let u: Vec<f64> = (0..brute.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = brute.apply_values(&u);
        let b = sweep.apply_values(&u);
        assert!(sup_dist(&a, &b) <= 1e-12, "q = {q}: {}", sup_dist(&a, &b));
    }
}

#[test]
fn extension_matches_brute_force_off_grid() {
    for (q, c) in [(9, 2.0), (40, 17.0), (64, 60.0)] {
        let prob = cat_problem(q, "coscos", 0.0, c);
        let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
        let u: Vec<f64> = (0..prob.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pts = random_torus_points(300, 3);
        let fast = prob.extend(&u, &pts);
        for (k, y) in pts.iter().enumerate() {
            let slow = (0..prob.len())
                .map(|i| {
                    let PhasePoint::Torus(img) = prob.grid.images[i] else { unreachable!() };
                    u[i] + prob.weight[i] + c * systems::torus_dist(img, *y)
                })
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(fast[k], slow, epsilon = 1e-12);
        }
    }
}

#[test]
fn extension_agrees_with_operator_on_grid() {
    let prob = cat_problem(20, "coscos", 0.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<f64> = (0..prob.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pts: Vec<_> = (0..prob.len()).map(|i| prob.grid.torus_point(i)).collect();
    let ext = prob.extend(&u, &pts);
    let t = prob.apply_values(&u);
    assert!(sup_dist(&ext, &t) <= 1e-12);
}

#[test]
fn shift_solve_with_exact_phibar_is_calibrated() {
    let sol = solve_calibrated(&shift_problem(0.0)).unwrap();
    assert!(sol.report.calibration_residual <= 1e-10);
    assert!(sol.report.subaction_residual >= -1e-12);
    assert_eq!(sol.u.values[0], 0.0);
}

#[test]
fn shift_solve_above_phibar_diverges_linearly() {
    match solve_calibrated(&shift_problem(0.01)) {
        Err(Error::Divergence { slope, witness }) => {
            assert_abs_diff_eq!(slope, -0.01, epsilon = 1e-9);
            assert!(witness.len() >= 2);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn bisection_brackets_smallest_bounded_c() {
    let prob = cat_problem(16, "coscos:0.25", 0.0, 0.0);
    let sys = systems::cat_map();
    let (ebar, _) = orbits::birkhoff_min_periodic(&sys, &prob.phi, 8).unwrap();
    let prob = LaxOleinikProblem::new(prob.grid.clone(), prob.phi.clone(), ebar.value, 0.0).unwrap();
    let r = smallest_bounded_c(&prob, 0.0, 200.0, 1e-3).unwrap();
    let (lo, hi) = (r.diverges_at.unwrap(), r.bounded_at.unwrap());
    assert!(lo < hi && hi - lo <= 1e-3 * hi + 1e-12);
}

#[test]
fn zero_observable_solves_to_zero() {
    let prob = cat_problem(32, "zero", 0.0, 1.0);
    let sol = solve_calibrated(&prob).unwrap();
    assert!(sol.u.values.iter().all(|&v| v == 0.0));
    let rep = subaction_check(&sol.u.values, &prob, None, 500, 1);
    assert!(rep.within_bound);
    assert_eq!(rep.lipschitz_estimate, 0.0);
}

#[test]
fn csv_export_has_header_and_rows() {
    let prob = cat_problem(4, "coscos", 0.0, 20.0);
    let sol = solve_calibrated(&prob).unwrap();
    let csv = sol.u.to_csv(&prob.grid);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,u"));
    assert_eq!(lines.count(), 16);
}

#[test]
fn livsic_without_distortion_decreases_at_min_phi_minus_phibar() {
    let sys = systems::cat_map();
    let phi = systems::observable_library("coscos:0.25", &sys).unwrap();
    let (ebar, _) = orbits::birkhoff_min_periodic(&sys, &phi, 8).unwrap();
    let prob = LaxOleinikProblem::new(Grid::torus(&sys, 32).unwrap(), phi, ebar.value, 0.0).unwrap();
    let rep = livsic_lower_bound(&prob, 30, -1.0);
    let min_w = prob.weight.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min_w < 0.0);
    assert_abs_diff_eq!(rep.final_slope, min_w, epsilon = 1e-12);
    assert!(!rep.criterion_holds());
    assert_abs_diff_eq!(rep.witness_cost, rep.min_value, epsilon = 1e-9);
}

#[test]
fn value_iteration_matches_exhaustive_paths() {
    let prob = cat_problem(5, "coscos:0.25", 0.2, 1.5).with_engine(Engine::Brute);
    let mut u = vec![0.0; prob.len()];
    for n in 1..=3 {
        u = prob.apply_values(&u);
        assert_eq!(u.iter().cloned().fold(f64::INFINITY, f64::min), exhaustive_path_minimum(&prob, n));
    }
}

#[test]
fn returns_on_constant_sequence() {
    let pts = vec![0.0f64; 6];
    let d = decompose_returns(&pts, 0.1, |a, b| (a - b).abs());
    assert_eq!(d.taus, vec![0, 5]);
    assert!(d.holds());
}

#[test]
fn returns_without_recurrence_step_by_one() {
    let pts: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let d = decompose_returns(&pts, 0.5, |a, b| (a - b).abs());
    assert_eq!(d.taus, vec![0, 1, 2, 3, 4, 5]);
    assert!(d.holds());
}

#[test]
fn returns_jump_after_last_return() {
    // x_3 returns to x_0, so tau_1 = 4
    let pts = [0.0, 1.0, 2.0, 0.05, 3.0, 4.0];
    let d = decompose_returns(&pts, 0.1, |a: &f64, b: &f64| (a - b).abs());
    assert_eq!(d.taus, vec![0, 4, 5]);
    assert!(d.holds());
}

#[test]
fn true_orbit_is_one_third_kind_segment() {
    let sys = systems::cat_map();
    let phi = systems::observable_library("coscos", &sys).unwrap();
    let mut x = [0.1234, 0.5678];
    let mut pts = Vec::new();
    for _ in 0..8 {
        pts.push(PhasePoint::Torus(x));
        x = sys.map_torus(x);
    }
    let k = SegmentConstants { eps_as: 0.01, delta_as: 1.0, diam: 0.7, c: 10.0, phibar: 0.0 };
    let rep = classify_segments(&sys, &phi, &pts, &k);
    assert_eq!(rep.segments.len(), 1);
    assert_eq!(rep.segments[0].kind, SegmentKind::Third);
    let birkhoff: f64 = pts[..7].iter().map(|p| phi.eval(p)).sum();
    assert_abs_diff_eq!(rep.total, birkhoff, epsilon = 1e-9);
    assert!(rep.all_hold);
}

#[test]
fn large_jump_opens_first_kind_segment() {
    let sys = systems::cat_map();
    let phi = systems::observable_library("coscos", &sys).unwrap();
    let pts = vec![PhasePoint::Torus([0.0, 0.0]), PhasePoint::Torus([0.5, 0.5]), PhasePoint::Torus(sys.map_torus([0.5, 0.5]))];
    let k = SegmentConstants { eps_as: 0.01, delta_as: 1.0, diam: 0.7, c: 10.0, phibar: 0.0 };
    let rep = classify_segments(&sys, &phi, &pts, &k);
    let kinds: Vec<_> = rep.segments.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, vec![SegmentKind::First, SegmentKind::Third]);
    assert!(rep.segments[0].c_threshold.unwrap() > 0.0);
    assert!(rep.all_hold);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_is_monotone_and_nonexpansive(seed in any::<u64>(), q in 3usize..12, c in 0.0f64..30.0) {
        let prob = cat_problem(q, "coscos:0.25", 0.3, c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..prob.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();
        let (tu, tv) = (prob.apply_values(&u), prob.apply_values(&v));
        prop_assert!(tu.iter().zip(&tv).all(|(a, b)| a <= b));
        prop_assert!(sup_dist(&tu, &tv) <= sup_dist(&u, &v) + 1e-12);
    }

    #[test]
    fn sweep_and_brute_agree(seed in any::<u64>(), q in 2usize..24, c in 0.0f64..50.0) {
        let brute = cat_problem(q, "coscos", 0.0, c).with_engine(Engine::Brute);
        let sweep = cat_problem(q, "coscos", 0.0, c).with_engine(Engine::Sweep);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..brute.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        prop_assert!(sup_dist(&brute.apply_values(&u), &sweep.apply_values(&u)) <= 1e-12);
    }

    #[test]
    fn operator_output_is_c_lipschitz(seed in any::<u64>(), q in 3usize..14, c in 0.1f64..20.0) {
        let prob = cat_problem(q, "coscos", 0.0, c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..prob.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = prob.apply_values(&u);
        let (lip, _) = lipschitz_estimate(&prob.grid, &t, 10_000, seed);
        prop_assert!(lip <= c * (1.0 + 1e-12) + 1e-12);
    }
}
