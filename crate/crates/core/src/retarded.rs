//! Retarded two-detector dynamics.
//!
//! Each detector learns about the other only after the light travel time
//! `T = 2l/c`. Before `T` both follow the single-detector law; afterwards
//! the coupling uses the other detector's coordinate at `t - T`. The
//! resulting delay equations are integrated by the method of steps with
//! RK4; delayed values at half steps come from cubic Hermite interpolation
//! of the stored history.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{pair_velocity, single_detector_velocity, DetectorState, ExperimentConfig, ExperimentError};
use crate::numerics::sigmoid;

pub use crate::experiment::PairTrajectory as TrajectoryHistory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetardedError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient history: need t = {needed}, history covers [{lo}, {hi}]")]
    InsufficientHistory { needed: f64, lo: f64, hi: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64, partial: Box<TrajectoryHistory> },
    #[error("retarded time did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

pub type Result<T> = std::result::Result<T, RetardedError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetardedConfig {
    pub base: ExperimentConfig,
    /// Light travel time between the detectors.
    pub delay: f64,
}

impl RetardedConfig {
    pub fn new(base: ExperimentConfig, delay: f64) -> Result<Self> {
        let cfg = Self { base, delay };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Delay from the detector separation: `T = 2l/c`.
    pub fn from_light_speed(base: ExperimentConfig) -> Result<Self> {
        let c = base.c_light.ok_or_else(|| RetardedError::InvalidConfig("c is required to derive the delay".into()))?;
        Self::new(base, 2.0 * base.l / c)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(RetardedError::InvalidConfig(format!("T must be nonnegative and finite, got {}", self.delay)));
        }
        Ok(())
    }

    /// Integrator step: the largest step not above `dt` that divides `T`.
    pub fn step(&self) -> f64 {
        if self.delay == 0.0 {
            self.base.dt
        } else {
            self.delay / (self.delay / self.base.dt).ceil()
        }
    }

    /// Number of integrator steps spanning the delay.
    pub fn delay_steps(&self) -> usize {
        if self.delay == 0.0 {
            0
        } else {
            (self.delay / self.base.dt).ceil() as usize
        }
    }
}

/// Exponent of the coupled law for the detector at `own`, given the other
/// detector's coordinate at `t - T`.
#[inline]
fn coupled_rate(own: f64, other_delayed: f64, t: f64, delay: f64) -> f64 {
    let lag = t - delay;
    sigmoid(2.0 * own * t - 2.0 * other_delayed * lag - delay * (2.0 * t - delay))
}

/// `(u̇, v̇)` of the retarded equations. For `t < T` the detectors are
/// independent; otherwise the delayed coordinates are read from `hist`.
pub fn retarded_pair_velocity(t: f64, u: f64, v: f64, hist: &TrajectoryHistory, delay: f64) -> Result<(f64, f64)> {
    if delay == 0.0 {
        return Ok(pair_velocity(DetectorState { u, v, t }));
    }
    if t < delay {
        return Ok((single_detector_velocity(u, t), single_detector_velocity(v, t)));
    }
    let lag = t - delay;
    let (u_lag, v_lag) = hist.query(lag).ok_or_else(|| RetardedError::InsufficientHistory {
        needed: lag,
        lo: hist.times.first().copied().unwrap_or(f64::NAN),
        hi: hist.times.last().copied().unwrap_or(f64::NAN),
    })?;
    Ok((coupled_rate(u, v_lag, t, delay), coupled_rate(v, u_lag, t, delay)))
}

/// Method-of-steps integration of the retarded equations from `t = 0`.
///
/// The step divides `T`, so the switch at `t = T` is a step boundary and
/// delayed lookups at step boundaries land on stored nodes. The run covers
/// `[0, t_final]` rounded up to whole steps.
pub fn integrate_retarded(u0: f64, v0: f64, cfg: &RetardedConfig) -> Result<TrajectoryHistory> {
    cfg.validate()?;
    let h = cfg.step();
    let k = cfg.delay_steps();
    let delay = cfg.delay;
    let steps = (cfg.base.t_final / h - 1e-9).ceil().max(1.0) as usize;
    let mut hist = TrajectoryHistory::with_capacity(steps + 1);

    // Right-hand side for step `i` at stage fraction `c` (0, 1/2 or 1).
    let rhs = |hist: &TrajectoryHistory, i: usize, c: f64, y: [f64; 2]| -> [f64; 2] {
        let t = (i as f64 + c) * h;
        if delay == 0.0 {
            let (du, dv) = pair_velocity(DetectorState { u: y[0], v: y[1], t });
            return [du, dv];
        }
        if i < k {
            return [single_detector_velocity(y[0], t), single_detector_velocity(y[1], t)];
        }
        let j = i - k;
        let (u_lag, v_lag) = if c == 0.0 {
            (hist.u[j], hist.v[j])
        } else if c == 1.0 {
            (hist.u[j + 1], hist.v[j + 1])
        } else {
            (hist.hermite_u(j, c), hist.hermite_v(j, c))
        };
        [coupled_rate(y[0], v_lag, t, delay), coupled_rate(y[1], u_lag, t, delay)]
    };

    let mut y = [u0, v0];
    for i in 0..=steps {
        let t = i as f64 * h;
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(RetardedError::NonFinite { t, partial: Box::new(hist) });
        }
        // Node derivative uses the form valid from this node onwards; the
        // two forms agree at t = T.
        let d = rhs(&hist, i, 0.0, y);
        // Node i must be stored before stage lookups of step i when T = h.
        hist.push(t, y[0], y[1], d[0], d[1]);
        if i == steps {
            break;
        }
        let k1 = d;
        let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
        let k2 = rhs(&hist, i, 0.5, y2);
        let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]];
        let k3 = rhs(&hist, i, 0.5, y3);
        let y4 = [y[0] + h * k3[0], y[1] + h * k3[1]];
        let k4 = rhs(&hist, i, 1.0, y4);
        y = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
    }
    Ok(hist)
}

/// Single-detector run on the same step sequence the retarded integrator
/// uses for `cfg`, returning `(times, v, v̇)`.
pub fn integrate_solo(v0: f64, cfg: &RetardedConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let h = cfg.step();
    let steps = (cfg.base.t_final / h - 1e-9).ceil().max(1.0) as usize;
    let (mut ts, mut vs, mut ds) =
        (Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1));
    let mut v = v0;
    for i in 0..=steps {
        let t = i as f64 * h;
        let d = single_detector_velocity(v, t);
        ts.push(t);
        vs.push(v);
        ds.push(d);
        if i == steps {
            break;
        }
        let k1 = d;
        let k2 = single_detector_velocity(v + 0.5 * h * k1, (i as f64 + 0.5) * h);
        let k3 = single_detector_velocity(v + 0.5 * h * k2, (i as f64 + 0.5) * h);
        let k4 = single_detector_velocity(v + h * k3, (i as f64 + 1.0) * h);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok((ts, vs, ds))
}

/// Iteration cap for [`retarded_time`].
pub const RETARDED_TIME_MAX_ITER: usize = 200;
/// Convergence tolerance for [`retarded_time`].
pub const RETARDED_TIME_TOL: f64 = 1e-10;

/// Solves `t_k = t_i - |x_i - x_k(t_k)| / c` for the emission time `t_k`
/// on the backward light cone of `(t_i, x_i)`.
///
/// `other` returns the other particle's position, or `None` where its
/// history is unknown. The iteration is a fixed-point map whose damping is
/// set from the secant slope, so a source in uniform motion converges in
/// two steps; any sub-luminal history converges.
pub fn retarded_time(t_i: f64, x_i: f64, other: impl Fn(f64) -> Option<f64>, c_light: f64) -> Result<f64> {
    if !(c_light > 0.0 && c_light.is_finite()) {
        return Err(RetardedError::InvalidArgument(format!("c must be positive, got {c_light}")));
    }
    let short = |t: f64| RetardedError::InsufficientHistory { needed: t, lo: f64::NAN, hi: t_i };
    let g = |s: f64| -> Result<f64> {
        let x = other(s).ok_or_else(|| short(s))?;
        Ok(t_i - (x_i - x).abs() / c_light)
    };

    let mut s = t_i;
    let mut gs = g(s)?;
    let mut prev: Option<(f64, f64)> = None;
    let mut last_change = f64::INFINITY;
    for _ in 0..RETARDED_TIME_MAX_ITER {
        // Damping 1/(1 - g') makes the update a secant step on s - g(s).
        let damping = match prev {
            Some((sp, gp)) if (s - sp).abs() > 0.0 => {
                let slope = (gs - gp) / (s - sp);
                (1.0 / (1.0 - slope)).clamp(0.5, 1.0e3)
            }
            _ => 1.0,
        };
        let next = (s + damping * (gs - s)).min(t_i);
        last_change = (next - s).abs();
        prev = Some((s, gs));
        s = next;
        if last_change < RETARDED_TIME_TOL {
            return Ok(s);
        }
        gs = g(s)?;
    }
    Err(RetardedError::NoConvergence { iterations: RETARDED_TIME_MAX_ITER, last_change })
}

/// `l ħ / (m c d λ)`: values of order one or above mean a significant
/// fraction of runs give both-or-neither outcomes.
pub fn wrongness_parameter(l: f64, m: f64, d: f64, lambda: f64, hbar: f64, c_light: f64) -> Result<f64> {
    for (name, value) in [("l", l), ("m", m), ("d", d), ("lambda", lambda), ("hbar", hbar), ("c", c_light)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(RetardedError::InvalidArgument(format!("{name} must be positive and finite, got {value}")));
        }
    }
    Ok(l * hbar / (m * c_light * d * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(delay: f64) -> RetardedConfig {
        RetardedConfig::new(ExperimentConfig::default(), delay).unwrap()
    }

    #[test]
    fn step_divides_delay() {
        for delay in [0.1, 1.0, 2.0, 0.3337, 7.77] {
            let c = cfg(delay);
            let h = c.step();
            assert!(h <= 1e-3 * (1.0 + 1e-12));
            assert!((c.delay_steps() as f64 * h - delay).abs() < 1e-12 * delay.max(1.0));
        }
        assert_eq!(cfg(0.0).step(), 1e-3);
        // A delay shorter than dt shrinks the step to the delay.
        assert_eq!(cfg(4e-4).step(), 4e-4);
    }

    #[test]
    fn config_from_light_speed() {
        let base = ExperimentConfig { l: 3.0, c_light: Some(3.0), ..Default::default() };
        assert_eq!(RetardedConfig::from_light_speed(base).unwrap().delay, 2.0);
        assert!(RetardedConfig::from_light_speed(ExperimentConfig::default()).is_err());
        assert!(RetardedConfig::new(ExperimentConfig::default(), -1.0).is_err());
    }

    #[test]
    fn zero_delay_velocity_is_pair_velocity() {
        let hist = TrajectoryHistory::default();
        for (t, u, v) in [(0.0, 0.3, -0.2), (2.5, 1.0, 1.4), (9.0, -3.0, 2.0)] {
            let got = retarded_pair_velocity(t, u, v, &hist, 0.0).unwrap();
            assert_eq!(got, pair_velocity(DetectorState { u, v, t }));
        }
    }

    #[test]
    fn pre_delay_velocity_ignores_history() {
        let empty = TrajectoryHistory::default();
        let got = retarded_pair_velocity(0.5, 0.2, -0.4, &empty, 1.0).unwrap();
        assert_eq!(got, (single_detector_velocity(0.2, 0.5), single_detector_velocity(-0.4, 0.5)));
    }

    #[test]
    fn delayed_lookup_at_switch_and_missing_history() {
        let c = cfg(1.0);
        let hist = integrate_retarded(0.4, -0.3, &c).unwrap();
        let (du, dv) = retarded_pair_velocity(1.0, 0.9, 0.2, &hist, 1.0).unwrap();
        assert!(du.is_finite() && dv.is_finite());
        // At t = T the lag is zero, so the coupled form reduces to the solo one.
        assert!((du - single_detector_velocity(0.9, 1.0)).abs() < 1e-15);
        let short = TrajectoryHistory::default();
        assert!(matches!(
            retarded_pair_velocity(2.0, 0.0, 0.0, &short, 1.0),
            Err(RetardedError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn small_delay_keeps_correct_outcome() {
        let hist = integrate_retarded(0.6, 0.5, &cfg(0.1)).unwrap();
        let (du, dv) = hist.final_velocities().unwrap();
        assert!(du > 0.99, "u fires: {du}");
        assert!(dv < 0.01, "v silent: {dv}");
    }

    #[test]
    fn retarded_time_static_and_instantaneous() {
        let t = retarded_time(5.0, 2.0, |_| Some(-1.0), 3.0).unwrap();
        assert!((t - (5.0 - 1.0)).abs() < 1e-12);
        let t = retarded_time(5.0, 2.0, |s| Some(-1.0 + 0.1 * s), 1e9).unwrap();
        assert!((t - 5.0).abs() < 1e-8);
    }

    #[test]
    fn retarded_time_errors() {
        assert!(matches!(
            retarded_time(1.0, 0.0, |s| if s >= 0.5 { Some(5.0) } else { None }, 1.0),
            Err(RetardedError::InsufficientHistory { .. })
        ));
        assert!(retarded_time(1.0, 0.0, |_| Some(1.0), 0.0).is_err());
    }

    #[test]
    fn wrongness_parameter_linear_in_l() {
        let a = wrongness_parameter(1.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        let b = wrongness_parameter(2.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!((a - 5.0 / 144.0).abs() < 1e-15);
        let err = wrongness_parameter(1.0, 0.0, 1.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("m must be positive"));
    }
}
