use pilotwave::ensemble::{classify, sample_initial, Outcome};
use pilotwave::experiment::{integrate_pair, pair_velocity, DetectorState, ExperimentConfig};
use pilotwave::retarded::{
    integrate_retarded, integrate_solo, retarded_pair_velocity, retarded_time, wrongness_parameter, RetardedConfig,
    RetardedError, TrajectoryHistory,
};
use proptest::prelude::*;

fn cfg(delay: f64) -> RetardedConfig {
    RetardedConfig::new(ExperimentConfig::default(), delay).unwrap()
}

#[test]
fn zero_delay_reproduces_the_instantaneous_dynamics() {
    let base = ExperimentConfig::default();
    let mut worst = 0.0f64;
    for (u0, v0) in sample_initial(3, 50, 1.0).unwrap() {
        let a = integrate_pair(u0, v0, &base).unwrap();
        let b = integrate_retarded(u0, v0, &cfg(0.0)).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            worst = worst.max((a.u[i] - b.u[i]).abs()).max((a.v[i] - b.v[i]).abs());
        }
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn pre_delay_runs_match_solo_bit_for_bit() {
    for delay in [0.5, 1.0, 2.0, 3.3] {
        let c = cfg(delay);
        let k = c.delay_steps();
        for (u0, v0) in [(0.3, -0.2), (-1.1, 0.9), (0.05, 0.04)] {
            let pair = integrate_retarded(u0, v0, &c).unwrap();
            let (ts, us, _) = integrate_solo(u0, &c).unwrap();
            let (_, vs, _) = integrate_solo(v0, &c).unwrap();
            for i in 0..=k {
                assert_eq!(pair.times[i].to_bits(), ts[i].to_bits());
                assert_eq!(pair.u[i].to_bits(), us[i].to_bits());
                assert_eq!(pair.v[i].to_bits(), vs[i].to_bits());
            }
            // the coupling changes things afterwards
            assert!((k + 1..pair.len()).any(|i| pair.u[i] != us[i] || pair.v[i] != vs[i]));
        }
    }
}

#[test]
fn huge_delay_keeps_detectors_independent() {
    // T = 2 t_final: no signal arrives inside the window
    let c = cfg(20.0);
    for (u0, v0) in [(0.4, 0.6), (-0.3, 0.2), (-0.8, -0.1)] {
        let pair = integrate_retarded(u0, v0, &c).unwrap();
        let (_, us, ud) = integrate_solo(u0, &c).unwrap();
        let (_, vs, vd) = integrate_solo(v0, &c).unwrap();
        assert_eq!(pair.u, us);
        assert_eq!(pair.v, vs);
        assert_eq!(pair.u_dot, ud);
        assert_eq!(pair.v_dot, vd);
    }
}

#[test]
fn small_delay_keeps_the_right_answer() {
    let tr = integrate_retarded(0.6, 0.5, &cfg(0.1)).unwrap();
    let (ud, vd) = tr.final_velocities().unwrap();
    assert_eq!(classify(ud, vd), Outcome::Right);
}

#[test]
fn conservation_breaks_with_delay() {
    let c = cfg(1.0);
    let violation = |u0: f64, v0: f64| {
        let tr = integrate_retarded(u0, v0, &c).unwrap();
        let n = tr.len() - 1;
        tr.u[n] + tr.v[n] - tr.times[n] - u0 - v0
    };
    let worst = [(0.3, 0.2), (-0.4, -0.6), (0.1, 0.7)].iter().map(|&(u, v)| violation(u, v).abs()).fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst:e}");
    // T = 0 keeps the law
    let tr = integrate_retarded(0.3, 0.2, &cfg(0.0)).unwrap();
    let n = tr.len() - 1;
    assert!((tr.u[n] + tr.v[n] - tr.times[n] - 0.5).abs() < 1e-9);
}

#[test]
fn pre_delay_conservation_only_on_the_invariant_line() {
    let c = cfg(2.0);
    let k = c.delay_steps();
    let on = integrate_retarded(0.4, -0.4, &c).unwrap();
    for i in 0..=k {
        assert!((on.u[i] + on.v[i] - on.times[i]).abs() < 1e-12);
    }
    let off = integrate_retarded(0.3, 0.3, &c).unwrap();
    assert!((off.u[k] + off.v[k] - off.times[k] - 0.6).abs() > 1e-3);
}

#[test]
fn velocity_law_examples() {
    let empty = TrajectoryHistory::default();
    for (t, u, v) in [(0.0, 0.2, -0.1), (1.5, -0.4, 0.9), (7.0, 3.0, 3.0)] {
        let want = pair_velocity(DetectorState { u, v, t });
        assert_eq!(retarded_pair_velocity(t, u, v, &empty, 0.0).unwrap(), want);
    }
    // before the delay the other coordinate and the history are irrelevant
    let a = retarded_pair_velocity(0.5, 0.3, -2.0, &empty, 1.0).unwrap();
    let b = retarded_pair_velocity(0.5, 0.3, 5.0, &empty, 1.0).unwrap();
    assert_eq!(a.0, b.0);
    let err = retarded_pair_velocity(1.5, 0.3, 0.1, &empty, 1.0).unwrap_err();
    assert!(matches!(err, RetardedError::InsufficientHistory { .. }));
    assert!(err.to_string().starts_with("insufficient history"));

    // at t = T the lookup lands on the initial state
    let mut hist = TrajectoryHistory::default();
    hist.push(0.0, 0.25, -0.5, 0.5, 0.5);
    hist.push(0.5, 0.5, -0.3, 0.5, 0.5);
    let (ud, vd) = retarded_pair_velocity(1.0, 0.7, 0.2, &hist, 1.0).unwrap();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    assert!((ud - sig(2.0 * 0.7 - 1.0)).abs() < 1e-15);
    assert!((vd - sig(2.0 * 0.2 - 1.0)).abs() < 1e-15);
    assert!(ud.is_finite() && vd.is_finite());
}

#[test]
fn history_interpolation_is_fourth_order() {
    let build = |h: f64| {
        let mut hist = TrajectoryHistory::default();
        let n = (2.0 / h).round() as usize;
        for i in 0..=n {
            let t = i as f64 * h;
            hist.push(t, t.sin(), (2.0 * t).cos(), t.cos(), -2.0 * (2.0 * t).sin());
        }
        hist
    };
    let err = |h: f64| {
        let hist = build(h);
        (0..200)
            .map(|j| 0.0037 + j as f64 * 0.0098)
            .map(|t| {
                let (u, v) = hist.query(t).unwrap();
                (u - t.sin()).abs().max((v - (2.0 * t).cos()).abs())
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(0.1), err(0.05));
    assert!(coarse / fine > 12.0, "{coarse:e} {fine:e}");
    assert!(build(0.1).query(2.5).is_none());
}

#[test]
fn retarded_time_static_and_instantaneous() {
    for (t_i, x_i, d, c) in [(5.0, 0.0, 3.0, 1.0), (2.0, 1.0, -4.0, 10.0), (0.5, -2.0, -2.25, 0.5)] {
        let tk = retarded_time(t_i, x_i, |_| Some(d), c).unwrap();
        assert!((tk - (t_i - (x_i - d).abs() / c)).abs() < 1e-10);
    }
    let tk = retarded_time(3.0, 0.0, |s| Some(1.0 + 0.3 * s.sin()), 1e9).unwrap();
    assert!((tk - 3.0).abs() < 1e-8);
}

#[test]
fn retarded_time_receding_source() {
    // x_k(t) = D + w t moving away from x_i = 0 at w = c/2:
    // t_k = t_i - (D + w t_k)/c  =>  t_k = (t_i - D/c) / (1 + w/c)
    let (c, d) = (2.0, 1.5);
    let w = 0.5 * c;
    for t_i in [1.0, 4.0, 9.5] {
        let tk = retarded_time(t_i, 0.0, |s| Some(d + w * s), c).unwrap();
        let want = (t_i - d / c) / (1.0 + w / c);
        assert!((tk - want).abs() < 1e-10, "{tk} vs {want}");
    }
}

#[test]
fn retarded_time_errors() {
    let short = retarded_time(1.0, 0.0, |s| if s >= 0.5 { Some(2.0) } else { None }, 1.0).unwrap_err();
    assert!(matches!(short, RetardedError::InsufficientHistory { .. }));
    assert!(retarded_time(1.0, 0.0, |_| Some(0.0), 0.0).is_err());
}

#[test]
fn wrongness_parameter_examples() {
    const HBAR: f64 = 1.054_571_817e-34;
    const C: f64 = 299_792_458.0;
    const M_E: f64 = 9.109_383_701_5e-31;
    // a one-gram pointer a few metres apart
    let pointer = wrongness_parameter(3.0, 1e-3, 1e-6, 500e-9, HBAR, C).unwrap();
    assert!(pointer < 1e-15);
    // electron and an optical photon: ~1e-5/d with d in metres
    for d in [1e-10, 1e-8, 1e-6] {
        let w = wrongness_parameter(3.0, M_E, d, 500e-9, HBAR, C).unwrap();
        let coefficient = w * d;
        assert!((1e-6..1e-4).contains(&coefficient), "{coefficient:e}");
    }
    assert!(wrongness_parameter(3.0, M_E, 1e-10, 500e-9, HBAR, C).unwrap() > 1e3);
    let one = wrongness_parameter(2.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let two = wrongness_parameter(4.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(two, 2.0 * one);
    assert!(wrongness_parameter(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    assert!(wrongness_parameter(1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn delay_from_light_speed() {
    let base = ExperimentConfig { l: 1.5, c_light: Some(3.0), ..Default::default() };
    assert_eq!(RetardedConfig::from_light_speed(base).unwrap().delay, 1.0);
    assert!(RetardedConfig::from_light_speed(ExperimentConfig::default()).is_err());
    assert!(RetardedConfig::new(ExperimentConfig::default(), -0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn causality(u0 in -2.0..2.0f64, v0 in -2.0..2.0f64, dv in -1.0..1.0f64, delay in 0.2..4.0f64) {
        let c = cfg(delay);
        let a = integrate_retarded(u0, v0, &c).unwrap();
        let b = integrate_retarded(u0, v0 + dv, &c).unwrap();
        for i in 0..=c.delay_steps() {
            prop_assert_eq!(a.u[i].to_bits(), b.u[i].to_bits());
        }
    }

    #[test]
    fn retarded_time_is_monotone(t1 in 0.0..10.0f64, dt in 0.0..5.0f64, amp in 0.0..0.9f64, x_i in -3.0..3.0f64) {
        // an oscillating source slower than light
        let other = move |s: f64| Some(4.0 + amp * (s).sin());
        let a = retarded_time(t1 + 10.0, x_i, other, 1.0).unwrap();
        let b = retarded_time(t1 + 10.0 + dt, x_i, other, 1.0).unwrap();
        prop_assert!(b >= a - 1e-10);
    }
}
