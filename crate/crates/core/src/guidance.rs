//! Guidance law, quantum potential and trajectory integration.
//!
//! Velocities follow `m ẋ = Re[(-iħ ∂ψ/∂x) / ψ]`; the divergence-free
//! addition to the current is fixed to zero. Every quantity that divides
//! by `ψ` refuses to evaluate where `|ψ|²` falls below a density floor.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::rk4_step;
use crate::wavefield::{Grid1D, Potential1D, Spectral, SplitStepPropagator, WaveFunction1D, WavefieldError};

/// Density floor relative to the peak density of the initial state.
pub const DENSITY_FLOOR_RATIO: f64 = 1e-12;

/// Trajectories must keep this many grid spacings away from the box edge.
pub const BOUNDARY_MARGIN_CELLS: f64 = 4.0;

/// Default trajectory step.
pub const DEFAULT_DT: f64 = 1e-3;

const STEP_RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("node region at x = {x}: density {density:.3e} below floor {floor:.3e}")]
    NodeRegion { x: f64, density: f64, floor: f64 },
    #[error("position {x} outside the usable domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("time {t} outside the available range [{lo}, {hi}]")]
    OutOfTime { t: f64, lo: f64, hi: f64 },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("need at least {needed} trajectory samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("wavefunctions live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Wavefield(#[from] WavefieldError),
}

pub type Result<T> = std::result::Result<T, GuidanceError>;

/// `ψ`, `ψ'` and `ψ''` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalWave {
    pub psi: Complex64,
    pub dpsi: Complex64,
    pub d2psi: Complex64,
}

impl LocalWave {
    pub fn density(&self) -> f64 {
        self.psi.norm_sqr()
    }

    /// `Re[(-iħ ψ')/ψ] / m`.
    pub fn velocity(&self, mass: f64, hbar: f64) -> f64 {
        hbar * (self.dpsi / self.psi).im / mass
    }

    /// `Re[(-ħ² ψ'')/ψ] / 2m - m v² / 2`.
    pub fn quantum_potential(&self, mass: f64, hbar: f64, v: f64) -> f64 {
        (-hbar * hbar * self.d2psi / self.psi).re / (2.0 * mass) - 0.5 * mass * v * v
    }

    fn lerp(a: &LocalWave, b: &LocalWave, w: f64) -> LocalWave {
        LocalWave {
            psi: a.psi * (1.0 - w) + b.psi * w,
            dpsi: a.dpsi * (1.0 - w) + b.dpsi * w,
            d2psi: a.d2psi * (1.0 - w) + b.d2psi * w,
        }
    }
}

/// A wavefunction with its spectral derivatives up to third order, ready for
/// off-grid evaluation by cubic Hermite interpolation.
///
/// Each of `ψ, ψ', ψ''` is interpolated from its own nodal values and the
/// next spectral derivative, so the interpolant is C¹ across nodes and the
/// guided velocity has no kinks at cell boundaries.
///
/// A field may cover only a window of grid nodes; queries outside the
/// window fail with [`GuidanceError::OutOfDomain`].
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Grid1D,
    mass: f64,
    hbar: f64,
    floor: f64,
    start: usize,
    periodic: bool,
    psi: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    d3: Vec<Complex64>,
}

impl GridField {
    /// Field over the whole grid with the floor taken from `psi` itself.
    pub fn new(psi: &WaveFunction1D) -> Self {
        let floor = DENSITY_FLOOR_RATIO * psi.peak_density();
        Self::with_floor(psi, floor, &Spectral::new(psi.grid().len()), None)
    }

    /// Field restricted to the nodes covering `window` (if given).
    pub fn with_floor(psi: &WaveFunction1D, floor: f64, spectral: &Spectral, window: Option<(f64, f64)>) -> Self {
        let grid = *psi.grid();
        let d1 = spectral.derivative(&grid, psi.amplitudes(), 1);
        let d2 = spectral.derivative(&grid, psi.amplitudes(), 2);
        let d3 = spectral.derivative(&grid, psi.amplitudes(), 3);
        let (start, end) = match window {
            None => (0, grid.len()),
            Some((lo, hi)) => {
                let s = ((lo - grid.x_min()) / grid.dx()).floor().max(0.0) as usize;
                let e = (((hi - grid.x_min()) / grid.dx()).ceil() as usize + 1).min(grid.len());
                (s.min(e), e)
            }
        };
        let periodic = start == 0 && end == grid.len();
        Self {
            grid,
            mass: psi.mass(),
            hbar: psi.hbar(),
            floor,
            start,
            periodic,
            psi: psi.amplitudes()[start..end].to_vec(),
            d1: d1[start..end].to_vec(),
            d2: d2[start..end].to_vec(),
            d3: d3[start..end].to_vec(),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Interval in which trajectories may move.
    pub fn domain(&self) -> (f64, f64) {
        let margin = BOUNDARY_MARGIN_CELLS * self.grid.dx();
        if self.periodic {
            (self.grid.x_min() + margin, self.grid.x_max() - margin)
        } else {
            let lo = self.grid.x(self.start);
            let hi = self.grid.x(self.start + self.psi.len() - 1);
            (lo + margin, hi - margin)
        }
    }

    /// Hermite interpolation of `ψ, ψ', ψ''` at `x`. No density check.
    pub fn interpolate(&self, x: f64) -> Result<LocalWave> {
        let s = (x - self.grid.x_min()) / self.grid.dx();
        let cell = s.floor();
        let f = s - cell;
        let n = self.grid.len() as isize;
        let index = |node: isize| -> Result<usize> {
            if self.periodic {
                return Ok(node.rem_euclid(n) as usize);
            }
            let k = node - self.start as isize;
            if k < 0 || k >= self.psi.len() as isize {
                let (lo, hi) = self.domain();
                return Err(GuidanceError::OutOfDomain { x, lo, hi });
            }
            Ok(k as usize)
        };
        let (a, b) = (index(cell as isize)?, index(cell as isize + 1)?);
        let (f2, f3) = (f * f, f * f * f);
        let h = self.grid.dx();
        let w = [2.0 * f3 - 3.0 * f2 + 1.0, h * (f3 - 2.0 * f2 + f), -2.0 * f3 + 3.0 * f2, h * (f3 - f2)];
        let blend = |y: &[Complex64], d: &[Complex64]| y[a] * w[0] + d[a] * w[1] + y[b] * w[2] + d[b] * w[3];
        Ok(LocalWave {
            psi: blend(&self.psi, &self.d1),
            dpsi: blend(&self.d1, &self.d2),
            d2psi: blend(&self.d2, &self.d3),
        })
    }

    /// Interpolated values, refusing points in the node region.
    pub fn local(&self, x: f64) -> Result<LocalWave> {
        let lw = self.interpolate(x)?;
        check_floor(&lw, x, self.floor)?;
        Ok(lw)
    }
}

fn check_floor(lw: &LocalWave, x: f64, floor: f64) -> Result<()> {
    let density = lw.density();
    if !(density > floor) {
        return Err(GuidanceError::NodeRegion { x, density, floor });
    }
    Ok(())
}

/// Guidance velocity of `psi` at `x`.
pub fn velocity_field(psi: &WaveFunction1D, x: f64) -> Result<f64> {
    let lw = GridField::new(psi).local(x)?;
    Ok(lw.velocity(psi.mass(), psi.hbar()))
}

/// Quantum potential of `psi` at `x` for a particle moving with velocity `v`.
pub fn quantum_potential(psi: &WaveFunction1D, x: f64, v: f64) -> Result<f64> {
    let lw = GridField::new(psi).local(x)?;
    Ok(lw.quantum_potential(psi.mass(), psi.hbar(), v))
}

/// One branch of a wavefunction whose other factors carry no trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    /// Density of the factors that were integrated out.
    pub weight: f64,
    /// `ψ* (p̂ ψ)` for the guided coordinate.
    pub current: Complex64,
    /// `|ψ|²` for the guided coordinate.
    pub density: f64,
}

/// `Re(Σ w·current) / (m Σ w·density)`.
pub fn marginal_velocity(branches: &[Branch], mass: f64, floor: f64) -> Result<f64> {
    let den: f64 = branches.iter().map(|b| b.weight * b.density).sum();
    if !(den > floor) {
        return Err(GuidanceError::NodeRegion { x: f64::NAN, density: den, floor });
    }
    let num: Complex64 = branches.iter().map(|b| b.current * b.weight).sum();
    Ok(num.re / (mass * den))
}

/// Time-indexed source of wavefunction values.
pub trait PsiProvider: Sync {
    fn mass(&self) -> f64;
    fn hbar(&self) -> f64;
    fn grid(&self) -> &Grid1D;
    /// Interval in which trajectories may move.
    fn domain(&self) -> (f64, f64);
    /// Spacing of stored time slices, if the source is time-sampled.
    fn snapshot_dt(&self) -> Option<f64>;
    /// Values at `(x, t)` without the density check.
    fn interpolate(&self, x: f64, t: f64) -> Result<LocalWave>;
    fn density_floor(&self) -> f64;

    fn local(&self, x: f64, t: f64) -> Result<LocalWave> {
        let lw = self.interpolate(x, t)?;
        check_floor(&lw, x, self.density_floor())?;
        Ok(lw)
    }

    fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.local(x, t)?.velocity(self.mass(), self.hbar()))
    }

    fn quantum_potential(&self, x: f64, t: f64) -> Result<f64> {
        let lw = self.local(x, t)?;
        let v = lw.velocity(self.mass(), self.hbar());
        Ok(lw.quantum_potential(self.mass(), self.hbar(), v))
    }
}

/// A stationary state: the same field at every time. Global phases do not
/// enter velocities or the quantum potential, so none is tracked.
impl PsiProvider for GridField {
    fn mass(&self) -> f64 {
        self.mass
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
    fn grid(&self) -> &Grid1D {
        &self.grid
    }
    fn domain(&self) -> (f64, f64) {
        GridField::domain(self)
    }
    fn snapshot_dt(&self) -> Option<f64> {
        None
    }
    fn interpolate(&self, x: f64, _t: f64) -> Result<LocalWave> {
        GridField::interpolate(self, x)
    }
    fn density_floor(&self) -> f64 {
        self.floor
    }
}

/// Split-step propagated wavefunction stored at every propagator step.
/// Between slices amplitudes are interpolated linearly in time.
#[derive(Debug, Clone)]
pub struct SnapshotProvider {
    t_start: f64,
    dt: f64,
    slices: Vec<GridField>,
}

impl SnapshotProvider {
    /// Propagates `psi0` from its own time to `t_end` with step `dt`, keeping
    /// every slice. With `record_from`, slices before that time are not kept;
    /// with `window`, only nodes inside it are kept.
    pub fn propagate(
        psi0: &WaveFunction1D,
        potential: &Potential1D,
        dt: f64,
        t_end: f64,
        record_from: Option<f64>,
        window: Option<(f64, f64)>,
    ) -> Result<Self> {
        crate::wavefield::check_domain(psi0)?;
        let prop = SplitStepPropagator::new(*psi0.grid(), potential, psi0.mass(), psi0.hbar(), dt)?;
        let spectral = Spectral::new(psi0.grid().len());
        let floor = DENSITY_FLOOR_RATIO * psi0.peak_density();
        let t0 = psi0.time();
        let total = integer_steps(t_end - t0, dt)?;
        let skip = match record_from {
            Some(tr) if tr > t0 => integer_steps(tr - t0, dt)?,
            _ => 0,
        };
        let mut psi = psi0.clone();
        let mut slices = Vec::with_capacity(total - skip + 1);
        for k in 0..=total {
            if k >= skip {
                slices.push(GridField::with_floor(&psi, floor, &spectral, window));
            }
            if k < total {
                prop.step(&mut psi);
            }
        }
        Ok(Self { t_start: t0 + skip as f64 * dt, dt, slices })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + (self.slices.len() - 1) as f64 * self.dt
    }
}

impl PsiProvider for SnapshotProvider {
    fn mass(&self) -> f64 {
        self.slices[0].mass
    }
    fn hbar(&self) -> f64 {
        self.slices[0].hbar
    }
    fn grid(&self) -> &Grid1D {
        &self.slices[0].grid
    }
    fn domain(&self) -> (f64, f64) {
        self.slices[0].domain()
    }
    fn snapshot_dt(&self) -> Option<f64> {
        Some(self.dt)
    }
    fn density_floor(&self) -> f64 {
        self.slices[0].floor
    }

    fn interpolate(&self, x: f64, t: f64) -> Result<LocalWave> {
        let s = (t - self.t_start) / self.dt;
        let last = (self.slices.len() - 1) as f64;
        let out_of_time = || GuidanceError::OutOfTime { t, lo: self.t_start, hi: self.t_end() };
        if !(s > -STEP_RATIO_TOL && s < last + STEP_RATIO_TOL) {
            return Err(out_of_time());
        }
        let nearest = s.round();
        if (s - nearest).abs() < STEP_RATIO_TOL {
            return self.slices[nearest as usize].interpolate(x);
        }
        let k = s.floor() as usize;
        let w = s - k as f64;
        let a = self.slices[k].interpolate(x)?;
        let b = self.slices[k + 1].interpolate(x)?;
        Ok(LocalWave::lerp(&a, &b, w))
    }
}

fn integer_steps(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GuidanceError::InvalidStep(format!("dt must be positive, got {dt}")));
    }
    if !(span > 0.0) {
        return Err(GuidanceError::InvalidStep(format!("time span must be positive, got {span}")));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > STEP_RATIO_TOL * span.max(1.0) {
        return Err(GuidanceError::InvalidStep(format!("span {span} is not a multiple of dt {dt}")));
    }
    Ok(n as usize)
}

fn is_integer_ratio(a: f64, b: f64) -> bool {
    let r = a / b;
    (r - r.round()).abs() < 1e-9 * r.max(1.0)
}

/// Sampled particle path `x(t)` with the field velocity at each sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_position(&self) -> Option<f64> {
        self.positions.last().copied()
    }
}

/// Failed trajectory integration with everything computed before the failure.
#[derive(Debug, Clone, Error)]
#[error("trajectory failed at t = {t}: {source}")]
pub struct TrajectoryError {
    pub t: f64,
    pub partial: Trajectory,
    #[source]
    pub source: GuidanceError,
}

/// Integrates `ẋ = v(x, t)` with fixed-step RK4 from `(t0, x0)` to `t1`.
pub fn integrate_trajectory<P: PsiProvider + ?Sized>(
    provider: &P,
    x0: f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> std::result::Result<Trajectory, TrajectoryError> {
    let fail = |t: f64, partial: Trajectory, source: GuidanceError| TrajectoryError { t, partial, source };
    let steps = integer_steps(t1 - t0, dt).map_err(|e| fail(t0, Trajectory::default(), e))?;
    if let Some(snap) = provider.snapshot_dt() {
        if !(is_integer_ratio(snap, dt) || is_integer_ratio(dt, snap)) {
            let e = GuidanceError::InvalidStep(format!(
                "trajectory dt {dt} and propagator dt {snap} are not integer multiples"
            ));
            return Err(fail(t0, Trajectory::default(), e));
        }
    }
    let (lo, hi) = provider.domain();
    let in_domain = |x: f64| -> Result<()> {
        if x >= lo && x <= hi {
            Ok(())
        } else {
            Err(GuidanceError::OutOfDomain { x, lo, hi })
        }
    };

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        positions: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
    };
    let mut x = x0;
    for i in 0..=steps {
        let t = t0 + i as f64 * dt;
        let v = in_domain(x).and_then(|_| provider.velocity(x, t));
        let v = match v {
            Ok(v) => v,
            Err(e) => return Err(fail(t, traj, e)),
        };
        traj.times.push(t);
        traj.positions.push(x);
        traj.velocities.push(v);
        if i == steps {
            break;
        }
        let mut err = None;
        let mut rhs = |tt: f64, y: [f64; 1]| -> [f64; 1] {
            if err.is_some() {
                return [0.0];
            }
            match in_domain(y[0]).and_then(|_| provider.velocity(y[0], tt)) {
                Ok(v) => [v],
                Err(e) => {
                    err = Some(e);
                    [0.0]
                }
            }
        };
        let next = rk4_step(&mut rhs, t, [x], dt)[0];
        if let Some(e) = err {
            return Err(fail(t, traj, e));
        }
        x = next;
    }
    Ok(traj)
}

/// Transports every start point to `t1`; results keep the input order.
pub fn transport_ensemble<P: PsiProvider + ?Sized>(
    provider: &P,
    starts: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> std::result::Result<Vec<f64>, (usize, TrajectoryError)> {
    starts
        .par_iter()
        .enumerate()
        .map(|(i, &x0)| {
            integrate_trajectory(provider, x0, t0, t1, dt)
                .map(|tr| tr.last_position().unwrap_or(x0))
                .map_err(|e| (i, e))
        })
        .collect()
}

/// `m ẍ + ∂(V + Q)/∂x` at the interior samples of `traj`.
///
/// `ẍ` is the centred difference of the stored velocities; the spatial
/// gradient is a centred difference with the grid spacing as step.
pub fn newton_residual<P: PsiProvider + ?Sized>(
    traj: &Trajectory,
    provider: &P,
    potential: &Potential1D,
) -> Result<Vec<f64>> {
    const NEEDED: usize = 5;
    if traj.len() < NEEDED {
        return Err(GuidanceError::TooFewSamples { needed: NEEDED, got: traj.len() });
    }
    let m = provider.mass();
    let grid = *provider.grid();
    let h = grid.dx();
    let total =
        |x: f64, t: f64| -> Result<f64> { Ok(potential.value_at(&grid, x) + provider.quantum_potential(x, t)?) };
    (1..traj.len() - 1)
        .map(|i| {
            let dt2 = traj.times[i + 1] - traj.times[i - 1];
            let accel = (traj.velocities[i + 1] - traj.velocities[i - 1]) / dt2;
            let (x, t) = (traj.positions[i], traj.times[i]);
            let force = (total(x + h, t)? - total(x - h, t)?) / (2.0 * h);
            Ok(m * accel + force)
        })
        .collect()
}

/// Pointwise `∂ρ/∂t + ∂j/∂x` with `∂ρ/∂t` from `before`/`after` (centred
/// on `mid`, `dt` apart on each side) and the current `j` from `mid`.
pub fn continuity_residual(
    before: &WaveFunction1D,
    mid: &WaveFunction1D,
    after: &WaveFunction1D,
    dt: f64,
) -> Result<Vec<f64>> {
    if before.grid() != mid.grid() || after.grid() != mid.grid() {
        return Err(GuidanceError::GridMismatch);
    }
    let grid = *mid.grid();
    let spectral = Spectral::new(grid.len());
    let d1 = spectral.derivative(&grid, mid.amplitudes(), 1);
    let scale = mid.hbar() / mid.mass();
    let current: Vec<Complex64> =
        mid.amplitudes().iter().zip(&d1).map(|(p, dp)| Complex64::new(scale * (p.conj() * dp).im, 0.0)).collect();
    let div = spectral.derivative(&grid, &current, 1);
    Ok(before
        .density()
        .iter()
        .zip(after.density())
        .zip(div)
        .map(|((rb, ra), dj)| (ra - rb) / (2.0 * dt) + dj.re)
        .collect())
}
