//! Two-detector photon experiment with instantaneous (non-retarded) guidance.
//!
//! Each detector is a free particle in a Gaussian packet that is kicked to
//! momentum `p` in the branch where it absorbed the photon. In the reduced
//! coordinates `u = x_R - l` and `v = -(x_L + l)` and units with
//! `a = p/m = 1` the guidance law collapses to two coupled sigmoids.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::{marginal_velocity, Branch, GuidanceError};
use crate::numerics::{gaussian_integral, hermite, rk4_step, sigmoid};

/// Velocity above which a detector counts as having fired.
pub const FIRE_THRESHOLD: f64 = 0.99;
/// Velocity below which a detector counts as silent.
pub const SILENT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at t = {t} (u = {u}, v = {v})")]
    NonFinite { t: f64, u: f64, v: f64 },
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Physical parameters of the experiment in code units (`ħ = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Packet width parameter; `|ψ|² ∝ exp(-a x²)`.
    pub a: f64,
    /// Momentum transferred by the photon.
    pub p: f64,
    /// Detector mass.
    pub m: f64,
    /// Detector half-separation.
    pub l: f64,
    /// Signal speed, when the delay is derived from `l`.
    pub c_light: Option<f64>,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { a: 1.0, p: 1.0, m: 1.0, l: 1.0, c_light: None, t_final: 10.0, dt: 1e-3 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fields =
            [("a", self.a), ("p", self.p), ("m", self.m), ("l", self.l), ("t_final", self.t_final), ("dt", self.dt)];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if let Some(c) = self.c_light {
            if !(c > 0.0 && c.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!("c must be positive and finite, got {c}")));
            }
        }
        if self.dt > self.t_final {
            return Err(ExperimentError::InvalidConfig(format!(
                "dt ({}) larger than t_final ({})",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// Length unit of the reduced equations, `a^{-1/2}`.
    pub fn length_unit(&self) -> f64 {
        self.a.sqrt().recip()
    }

    /// Time unit of the reduced equations, `m / (p √a)`.
    pub fn time_unit(&self) -> f64 {
        self.m / (self.p * self.a.sqrt())
    }

    pub fn is_code_units(&self) -> bool {
        self.a == 1.0 && self.p == self.m
    }

    /// Velocity of the guided coordinate in the branch where the detector
    /// was kicked.
    pub fn kick_speed(&self) -> f64 {
        self.p / self.m
    }

    /// Number of fixed steps covering `[0, t_final]`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Reduced detector coordinates at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub u: f64,
    pub v: f64,
    pub t: f64,
}

/// Gaussian detector packet that translates without spreading (`ħ = 1`).
///
/// `ψ(x, t) = (a/π)^{1/4} exp[i(k x - k² t / 2m + φ)] exp[-a (x - x_c(t))² / 2]`
/// with `x_c(t) = center + k t / m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub center: f64,
    pub momentum: f64,
    pub a: f64,
    pub mass: f64,
    pub phase_offset: f64,
}

impl GaussianPacket {
    pub fn new(center: f64, momentum: f64, a: f64, mass: f64) -> Self {
        Self { center, momentum, a, mass, phase_offset: 0.0 }
    }

    pub fn center_at(&self, t: f64) -> f64 {
        self.center + self.momentum * t / self.mass
    }

    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        let norm = (self.a / std::f64::consts::PI).powf(0.25);
        let d = x - self.center_at(t);
        let phase = self.momentum * x - self.momentum * self.momentum * t / (2.0 * self.mass) + self.phase_offset;
        Complex64::from_polar(norm * (-0.5 * self.a * d * d).exp(), phase)
    }

    /// `∂ψ/∂x`.
    pub fn derivative(&self, x: f64, t: f64) -> Complex64 {
        let d = x - self.center_at(t);
        self.eval(x, t) * Complex64::new(-self.a * d, self.momentum)
    }

    /// `ψ* (-i ∂ψ/∂x)`.
    pub fn current(&self, x: f64, t: f64) -> Complex64 {
        self.eval(x, t).conj() * (Complex64::new(0.0, -1.0) * self.derivative(x, t))
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.eval(x, t).norm_sqr()
    }

    /// Branch entry for [`marginal_velocity`] with this packet guiding and
    /// `weight` from the other, trajectory-free factors.
    pub fn branch(&self, x: f64, t: f64, weight: f64) -> Branch {
        Branch { weight, current: self.current(x, t), density: self.density(x, t) }
    }
}

/// The four detector packets of the post-interaction state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPackets {
    pub left_rest: GaussianPacket,
    pub left_kicked: GaussianPacket,
    pub right_rest: GaussianPacket,
    pub right_kicked: GaussianPacket,
}

impl DetectorPackets {
    /// The left detector sits at `-l` and is kicked towards `-x`; the right
    /// one sits at `+l` and is kicked towards `+x`.
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            left_rest: GaussianPacket::new(-cfg.l, 0.0, cfg.a, cfg.m),
            left_kicked: GaussianPacket::new(-cfg.l, -cfg.p, cfg.a, cfg.m),
            right_rest: GaussianPacket::new(cfg.l, 0.0, cfg.a, cfg.m),
            right_kicked: GaussianPacket::new(cfg.l, cfg.p, cfg.a, cfg.m),
        }
    }
}

/// `(u̇, v̇)` of the reduced non-retarded equations (code units).
pub fn pair_velocity(state: DetectorState) -> (f64, f64) {
    let DetectorState { u, v, t } = state;
    (sigmoid(-2.0 * t * (v - u)), sigmoid(-2.0 * t * (u - v)))
}

/// `(ẋ_L, ẋ_R)` computed directly from the branch packets by marginalising
/// over the photon. Works in any units.
pub fn pair_velocity_from_wavefunction(x_l: f64, x_r: f64, t: f64, cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let pk = DetectorPackets::new(cfg);
    let peak = cfg.a / std::f64::consts::PI;
    let floor = crate::guidance::DENSITY_FLOOR_RATIO * peak * peak;
    // Branch A: photon went left, so the left detector is kicked.
    // Branch B: photon went right.
    let left = [
        pk.left_kicked.branch(x_l, t, pk.right_rest.density(x_r, t)),
        pk.left_rest.branch(x_l, t, pk.right_kicked.density(x_r, t)),
    ];
    let right = [
        pk.right_rest.branch(x_r, t, pk.left_kicked.density(x_l, t)),
        pk.right_kicked.branch(x_r, t, pk.left_rest.density(x_l, t)),
    ];
    Ok((marginal_velocity(&left, cfg.m, floor)?, marginal_velocity(&right, cfg.m, floor)?))
}

/// Maps physical detector positions to reduced coordinates in code units.
pub fn to_reduced(x_l: f64, x_r: f64, t: f64, cfg: &ExperimentConfig) -> DetectorState {
    let (lu, tu) = (cfg.length_unit(), cfg.time_unit());
    DetectorState { u: (x_r - cfg.l) / lu, v: -(x_l + cfg.l) / lu, t: t / tu }
}

/// Converts reduced velocities `(u̇, v̇)` back to `(ẋ_L, ẋ_R)`.
pub fn from_reduced_velocity(u_dot: f64, v_dot: f64, cfg: &ExperimentConfig) -> (f64, f64) {
    let s = cfg.kick_speed();
    (-v_dot * s, u_dot * s)
}

/// Single-detector law `v̇ = σ(t(2v - t))`.
pub fn single_detector_velocity(v: f64, t: f64) -> f64 {
    sigmoid(t * (2.0 * v - t))
}

/// Dense record of a reduced two-detector run on a uniform time grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_dot: Vec<f64>,
    pub v_dot: Vec<f64>,
}

impl PairTrajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            u_dot: Vec::with_capacity(n),
            v_dot: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, u: f64, v: f64, u_dot: f64, v_dot: f64) {
        self.times.push(t);
        self.u.push(u);
        self.v.push(v);
        self.u_dot.push(u_dot);
        self.v_dot.push(v_dot);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last(&self) -> Option<DetectorState> {
        let i = self.len().checked_sub(1)?;
        Some(DetectorState { u: self.u[i], v: self.v[i], t: self.times[i] })
    }

    pub fn final_velocities(&self) -> Option<(f64, f64)> {
        Some((*self.u_dot.last()?, *self.v_dot.last()?))
    }

    /// Cubic Hermite interpolation of `(u, v)` at `t`, or `None` outside
    /// the recorded range.
    pub fn query(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.len();
        if n == 0 || !(t >= self.times[0]) {
            return None;
        }
        if n == 1 {
            return (t == self.times[0]).then(|| (self.u[0], self.v[0]));
        }
        let h = self.step();
        let s = (t - self.times[0]) / h;
        let last = (n - 1) as f64;
        if s > last + 1e-9 {
            return None;
        }
        let k = (s.floor() as usize).min(n - 2);
        let frac = (s - k as f64).clamp(0.0, 1.0);
        Some((self.hermite_u(k, frac), self.hermite_v(k, frac)))
    }

    pub(crate) fn hermite_u(&self, k: usize, s: f64) -> f64 {
        if s == 0.0 {
            return self.u[k];
        }
        if s == 1.0 {
            return self.u[k + 1];
        }
        hermite(self.u[k], self.u_dot[k], self.u[k + 1], self.u_dot[k + 1], self.times[k + 1] - self.times[k], s)
    }

    pub(crate) fn hermite_v(&self, k: usize, s: f64) -> f64 {
        if s == 0.0 {
            return self.v[k];
        }
        if s == 1.0 {
            return self.v[k + 1];
        }
        hermite(self.v[k], self.v_dot[k], self.v[k + 1], self.v_dot[k + 1], self.times[k + 1] - self.times[k], s)
    }
}

/// RK4 integration of the coupled non-retarded equations from `t = 0`.
pub fn integrate_pair(u0: f64, v0: f64, cfg: &ExperimentConfig) -> Result<PairTrajectory> {
    cfg.validate()?;
    let h = cfg.dt;
    let steps = cfg.steps();
    let mut f = |t: f64, y: [f64; 2]| {
        let (du, dv) = pair_velocity(DetectorState { u: y[0], v: y[1], t });
        [du, dv]
    };
    let mut traj = PairTrajectory::with_capacity(steps + 1);
    let mut y = [u0, v0];
    for i in 0..=steps {
        let t = i as f64 * h;
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(ExperimentError::NonFinite { t, u: y[0], v: y[1] });
        }
        let d = f(t, y);
        traj.push(t, y[0], y[1], d[0], d[1]);
        if i < steps {
            y = rk4_step(&mut f, t, y, h);
        }
    }
    Ok(traj)
}

/// RK4 integration of the single-detector law from `t = 0`.
pub fn integrate_single(v0: f64, cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let h = cfg.dt;
    let steps = cfg.steps();
    let mut f = |t: f64, y: [f64; 1]| [single_detector_velocity(y[0], t)];
    let (mut ts, mut vs, mut ds) =
        (Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1));
    let mut y = [v0];
    for i in 0..=steps {
        let t = i as f64 * h;
        if !y[0].is_finite() {
            return Err(ExperimentError::NonFinite { t, u: f64::NAN, v: y[0] });
        }
        ts.push(t);
        vs.push(y[0]);
        ds.push(f(t, y)[0]);
        if i < steps {
            y = rk4_step(&mut f, t, y, h);
        }
    }
    Ok((ts, vs, ds))
}

/// Left-hand minus right-hand side of the first integral of the reduced
/// equations:
///
/// `∫_{-(u0-v0)/2}^{(u0-v0)/2} e^{-2y²} dy - ∫_{t-(u-s)}^{u-s} e^{-2y²} dy`,
/// with `s = (u0 + v0)/2`.
pub fn implicit_solution_residual(u: f64, t: f64, u0: f64, v0: f64) -> f64 {
    let half_gap = 0.5 * (u0 - v0);
    let shifted = u - 0.5 * (u0 + v0);
    gaussian_integral(-half_gap, half_gap) - gaussian_integral(t - shifted, shifted)
}
