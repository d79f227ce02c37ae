use num_complex::Complex64;
use pilotwave::experiment::{
    from_reduced_velocity, implicit_solution_residual, integrate_pair, integrate_single, pair_velocity,
    pair_velocity_from_wavefunction, single_detector_velocity, to_reduced, DetectorState, ExperimentConfig,
    GaussianPacket, FIRE_THRESHOLD, SILENT_THRESHOLD,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reduced velocities evaluated straight from the two-branch state, with
/// every packet written out by hand rather than through the library.
fn branch_oracle(u: f64, v: f64, t: f64) -> (f64, f64) {
    // code units: a = p = m = 1, l irrelevant after the shift
    let g = |d: f64| (-0.5 * d * d).exp();
    // left detector: v = -(x_L + l); kicked packet centred at v = t
    let (l_rest, l_kick) = (g(v), g(v - t));
    let (r_rest, r_kick) = (g(u), g(u - t));
    // branch A: left kicked, right at rest; branch B: the reverse
    let wa = (l_kick * r_rest).powi(2);
    let wb = (l_rest * r_kick).powi(2);
    let u_dot = wb / (wa + wb);
    let v_dot = wa / (wa + wb);
    (u_dot, v_dot)
}

#[test]
fn reduction_identity_code_units() {
    let cfg = ExperimentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (u, v, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0));
        let (x_l, x_r) = (-(v + cfg.l), u + cfg.l);
        let (xl_dot, xr_dot) = pair_velocity_from_wavefunction(x_l, x_r, t, &cfg).unwrap();
        let st = to_reduced(x_l, x_r, t, &cfg);
        assert!((st.u - u).abs() < 1e-12 && (st.v - v).abs() < 1e-12);
        let (u_dot, v_dot) = pair_velocity(st);
        let (want_l, want_r) = from_reduced_velocity(u_dot, v_dot, &cfg);
        assert!((xl_dot - want_l).abs() < 1e-10, "{xl_dot} vs {want_l}");
        assert!((xr_dot - want_r).abs() < 1e-10, "{xr_dot} vs {want_r}");
        let (ou, ov) = branch_oracle(u, v, t);
        assert!((u_dot - ou).abs() < 1e-12 && (v_dot - ov).abs() < 1e-12);
    }
}

#[test]
fn reduction_identity_general_units() {
    let cfg = ExperimentConfig { a: 2.5, p: 3.0, m: 1.7, l: 4.0, ..Default::default() };
    let (lu, tu) = (cfg.length_unit(), cfg.time_unit());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (u, v, tau) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0));
        let (x_l, x_r, t) = (-(v * lu + cfg.l), u * lu + cfg.l, tau * tu);
        let (xl_dot, xr_dot) = pair_velocity_from_wavefunction(x_l, x_r, t, &cfg).unwrap();
        let (u_dot, v_dot) = pair_velocity(to_reduced(x_l, x_r, t, &cfg));
        let (want_l, want_r) = from_reduced_velocity(u_dot, v_dot, &cfg);
        assert!((xl_dot - want_l).abs() < 1e-10);
        assert!((xr_dot - want_r).abs() < 1e-10);
    }
}

#[test]
fn wavefunction_route_limits() {
    let cfg = ExperimentConfig::default();
    // mirror-symmetric configuration at t = 0
    let (xl, xr) = pair_velocity_from_wavefunction(-1.3, 1.3, 0.0, &cfg).unwrap();
    assert!((xl.abs() - xr.abs()).abs() < 1e-15);
    // right detector deep in its kicked branch: moves at p/m
    let (_, xr) = pair_velocity_from_wavefunction(-cfg.l, cfg.l + 6.0, 6.0, &cfg).unwrap();
    assert!((xr - cfg.p / cfg.m).abs() < 1e-10);
}

#[test]
fn packet_examples() {
    let a = 1.0;
    let rest = GaussianPacket::new(0.0, 0.0, a, 1.0);
    let peak = (a / std::f64::consts::PI).powf(0.25);
    assert!((rest.eval(0.0, 0.0) - Complex64::new(peak, 0.0)).norm() < 1e-15);
    let moving = GaussianPacket::new(0.3, 1.5, 2.0, 1.0);
    for w in [0.1, 0.7, 1.9] {
        let c = moving.center_at(0.8);
        assert!((moving.eval(c + w, 0.8).norm() - moving.eval(c - w, 0.8).norm()).abs() < 1e-15);
    }
    // the left kicked packet moves towards -x
    let left = GaussianPacket::new(-1.0, -1.0, 1.0, 1.0);
    let t = 2.0;
    let grid: Vec<f64> = (0..4001).map(|i| -8.0 + 0.002 * i as f64).collect();
    let argmax = grid.iter().copied().max_by(|x, y| left.density(*x, t).total_cmp(&left.density(*y, t))).unwrap();
    assert!((argmax - (-1.0 - t)).abs() < 1e-9);
}

#[test]
fn pair_and_single_velocity_examples() {
    for (u, t) in [(0.3, 4.0), (-2.0, 0.7)] {
        assert_eq!(pair_velocity(DetectorState { u, v: u, t }), (0.5, 0.5));
    }
    assert_eq!(pair_velocity(DetectorState { u: 1.0, v: -3.0, t: 0.0 }), (0.5, 0.5));
    let (ud, vd) = pair_velocity(DetectorState { u: 2.0, v: 0.0, t: 5.0 });
    assert!((ud - 1.0 / (1.0 + (-20f64).exp())).abs() < 1e-16 && vd < 1e-8);
    // no overflow at large times
    let (ud, vd) = pair_velocity(DetectorState { u: 50.0, v: -50.0, t: 40.0 });
    assert_eq!((ud, vd), (1.0, 0.0));

    assert_eq!(single_detector_velocity(0.7, 0.0), 0.5);
    let cfg = ExperimentConfig::default();
    let (_, _, up) = integrate_single(0.5, &cfg).unwrap();
    let (_, _, down) = integrate_single(-0.5, &cfg).unwrap();
    assert!(*up.last().unwrap() > FIRE_THRESHOLD);
    assert!(*down.last().unwrap() < SILENT_THRESHOLD);
}

#[test]
fn symmetric_start_stays_on_the_diagonal() {
    let tr = integrate_pair(0.0, 0.0, &ExperimentConfig::default()).unwrap();
    for i in 0..tr.len() {
        assert_eq!(tr.u[i], tr.v[i]);
        assert!((tr.u[i] - 0.5 * tr.times[i]).abs() < 1e-12);
    }
}

#[test]
fn right_detector_fires_for_u0_above_v0() {
    let tr = integrate_pair(1.0, -1.0, &ExperimentConfig::default()).unwrap();
    let n = tr.len();
    let late = n - 1001;
    assert!(((tr.u[n - 1] - tr.times[n - 1]) - (tr.u[late] - tr.times[late])).abs() < 1e-9);
    assert!((tr.v[n - 1] - tr.v[late]).abs() < 1e-9);
}

#[test]
fn oracle_holds_along_random_trajectories() {
    let cfg = ExperimentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (u0, v0) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let tr = integrate_pair(u0, v0, &cfg).unwrap();
        for i in 0..tr.len() {
            worst = worst.max(implicit_solution_residual(tr.u[i], tr.times[i], u0, v0).abs());
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn implicit_residual_examples() {
    assert_eq!(implicit_solution_residual(0.4, 0.0, 0.4, -1.1), 0.0);
    for t in [0.5, 2.0, 7.0] {
        assert!(implicit_solution_residual(0.5 * t + 0.3, t, 0.3, 0.3).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conservation(u0 in -3.0..3.0f64, v0 in -3.0..3.0f64) {
        let tr = integrate_pair(u0, v0, &ExperimentConfig::default()).unwrap();
        for i in 0..tr.len() {
            prop_assert!((tr.u[i] + tr.v[i] - tr.times[i] - u0 - v0).abs() < 1e-9);
        }
    }

    #[test]
    fn exchange_symmetry(u0 in -3.0..3.0f64, v0 in -3.0..3.0f64) {
        let cfg = ExperimentConfig::default();
        let a = integrate_pair(u0, v0, &cfg).unwrap();
        let b = integrate_pair(v0, u0, &cfg).unwrap();
        prop_assert_eq!(&a.u, &b.v);
        prop_assert_eq!(&a.v, &b.u);
    }

    #[test]
    fn exactly_one_detector(u0 in -3.0..3.0f64, v0 in -3.0..3.0f64) {
        prop_assume!((u0 - v0).abs() > 0.05);
        let (ud, vd) = integrate_pair(u0, v0, &ExperimentConfig::default()).unwrap().final_velocities().unwrap();
        let (hi, lo) = if u0 > v0 { (ud, vd) } else { (vd, ud) };
        prop_assert!(hi > FIRE_THRESHOLD && lo < SILENT_THRESHOLD);
    }

    #[test]
    fn contextuality(u0 in 0.2..3.0f64, frac in 0.05..0.95f64) {
        // 0 < v0 < u0: alone the left detector fires, paired it does not
        let v0 = frac * u0;
        prop_assume!(v0 > 0.05 && u0 - v0 > 0.05);
        let cfg = ExperimentConfig::default();
        let (_, _, solo) = integrate_single(v0, &cfg).unwrap();
        prop_assert!(*solo.last().unwrap() > FIRE_THRESHOLD);
        let (_, vd) = integrate_pair(u0, v0, &cfg).unwrap().final_velocities().unwrap();
        prop_assert!(vd < SILENT_THRESHOLD);
    }
}
