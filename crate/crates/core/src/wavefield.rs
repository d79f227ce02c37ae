//! Uniform-grid 1D wavefunctions and a spectral split-step propagator.
//!
//! The grid is periodic: node `i` sits at `x_min + i·dx` and `x_max` is
//! identified with `x_min`. Spatial derivatives are taken spectrally, which
//! keeps them consistent with the kinetic step of the propagator.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Smallest grid the propagator accepts.
pub const MIN_POINTS: usize = 8;

/// The propagator refuses packets whose spread exceeds `1/8` of the box.
pub const WIDTHS_PER_DOMAIN: f64 = 8.0;

/// Largest potential phase `dt·max|V|/ħ` accepted for one step.
pub const MAX_POTENTIAL_PHASE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WavefieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("degenerate wavefunction")]
    Degenerate,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unstable step: dt·max|V|/hbar = {phase:.3e} exceeds {limit}")]
    Unstable { phase: f64, limit: f64 },
    #[error("domain too small: packet spread {spread:.3e} needs a box of at least {needed:.3e}, have {length:.3e}")]
    DomainTooSmall { spread: f64, needed: f64, length: f64 },
}

pub type Result<T> = std::result::Result<T, WavefieldError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(WavefieldError::InvalidGrid(format!("need finite x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if n_points < MIN_POINTS {
            return Err(WavefieldError::InvalidGrid(format!("need at least {MIN_POINTS} points, got {n_points}")));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// The default acceptance grid: 1024 points on `[-20, 20)`.
    pub fn standard() -> Self {
        Self { x_min: -20.0, x_max: 20.0, n_points: 1024 }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    /// Angular wavenumber of FFT bin `j` (standard FFT ordering).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n_points as isize;
        let j = j as isize;
        let m = if j < (n + 1) / 2 { j } else { j - n };
        2.0 * PI * m as f64 / self.length()
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.n_points.is_multiple_of(2) && j == self.n_points / 2
    }
}

/// Forward/inverse FFT plans for one grid size.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), n }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse transform including the `1/n` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// `d^order/dx^order` of periodic samples on `grid`.
    pub fn derivative(&self, grid: &Grid1D, values: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            // The Nyquist mode has no well-defined odd derivative.
            if order % 2 == 1 && grid.is_nyquist(j) {
                *z = Complex64::new(0.0, 0.0);
                continue;
            }
            let ik = Complex64::new(0.0, grid.wavenumber(j));
            *z *= ik.powu(order);
        }
        self.inverse(&mut buf);
        buf
    }
}

/// Complex amplitudes on a [`Grid1D`] at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction1D {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
    time: f64,
    mass: f64,
    hbar: f64,
}

impl WaveFunction1D {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>, mass: f64, hbar: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(WavefieldError::LengthMismatch { expected: grid.len(), got: amplitudes.len() });
        }
        if let Some(i) = amplitudes.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(WavefieldError::NonFinite(i));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(WavefieldError::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(WavefieldError::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { grid, amplitudes, time: 0.0, mass, hbar })
    }

    /// Samples `f` on the grid. The result is not normalised.
    pub fn from_fn(grid: Grid1D, mass: f64, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amps = grid.points().map(f).collect();
        Self::new(grid, amps, mass, hbar)
    }

    /// Normalised Gaussian `exp(i p x/ħ - a (x - x0)^2 / 2)`.
    pub fn gaussian(grid: Grid1D, center: f64, momentum: f64, a: f64, mass: f64, hbar: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(WavefieldError::InvalidParameter(format!("width parameter must be positive, got {a}")));
        }
        Self::from_fn(grid, mass, hbar, |x| {
            let d = x - center;
            Complex64::from_polar((-0.5 * a * d * d).exp(), momentum * x / hbar)
        })?
        .normalize()
    }

    /// Ground state of `V = k x^2 / 2`, normalised on the grid.
    pub fn harmonic_ground_state(grid: Grid1D, k: f64, mass: f64, hbar: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(WavefieldError::InvalidParameter(format!("spring constant must be positive, got {k}")));
        }
        let omega = (k / mass).sqrt();
        Self::gaussian(grid, 0.0, 0.0, mass * omega / hbar, mass, hbar)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amplitudes.iter_mut().for_each(|z| *z *= factor);
        self
    }

    /// `Σ |ψ|² dx`.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(WavefieldError::Degenerate);
        }
        let s = 1.0 / n2.sqrt();
        self.amplitudes.iter_mut().for_each(|z| *z *= s);
        Ok(self)
    }

    /// Pointwise `|ψ|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn peak_density(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }

    pub fn mean_position(&self) -> f64 {
        let n2 = self.norm_squared();
        let dx = self.grid.dx();
        self.grid.points().zip(&self.amplitudes).map(|(x, z)| x * z.norm_sqr()).sum::<f64>() * dx / n2
    }

    pub fn position_variance(&self) -> f64 {
        let n2 = self.norm_squared();
        let dx = self.grid.dx();
        let mean = self.mean_position();
        self.grid.points().zip(&self.amplitudes).map(|(x, z)| (x - mean).powi(2) * z.norm_sqr()).sum::<f64>() * dx / n2
    }
}

/// External potential sampled on, or evaluated off, a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential1D {
    Free,
    /// `V = k x^2 / 2`.
    Harmonic {
        k: f64,
    },
    /// Values at the grid nodes; off-grid values use periodic cubic interpolation.
    Samples(Vec<f64>),
}

impl Potential1D {
    pub fn values(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self {
            Potential1D::Free => vec![0.0; grid.len()],
            Potential1D::Harmonic { k } => grid.points().map(|x| 0.5 * k * x * x).collect(),
            Potential1D::Samples(s) => {
                if s.len() != grid.len() {
                    return Err(WavefieldError::LengthMismatch { expected: grid.len(), got: s.len() });
                }
                s.clone()
            }
        };
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(WavefieldError::NonFinite(i));
        }
        Ok(v)
    }

    pub fn value_at(&self, grid: &Grid1D, x: f64) -> f64 {
        match self {
            Potential1D::Free => 0.0,
            Potential1D::Harmonic { k } => 0.5 * k * x * x,
            Potential1D::Samples(s) => {
                let (i, w) = cubic_stencil(grid, x);
                let n = grid.len() as isize;
                (0..4).map(|j| w[j] * s[(i + j as isize - 1).rem_euclid(n) as usize]).sum()
            }
        }
    }
}

/// Index of the node left of `x` and four-point Lagrange weights for nodes
/// `i-1, i, i+1, i+2`.
pub(crate) fn cubic_stencil(grid: &Grid1D, x: f64) -> (isize, [f64; 4]) {
    let s = (x - grid.x_min()) / grid.dx();
    let i = s.floor();
    let f = s - i;
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    (i as isize, w)
}

/// Strang-split propagator: half potential kick, exact kinetic step in
/// wavenumber space, half potential kick.
#[derive(Debug, Clone)]
pub struct SplitStepPropagator {
    grid: Grid1D,
    dt: f64,
    half_kick: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    spectral: Spectral,
}

impl SplitStepPropagator {
    pub fn new(grid: Grid1D, potential: &Potential1D, mass: f64, hbar: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(WavefieldError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let v = potential.values(&grid)?;
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let phase = dt * vmax / hbar;
        if phase > MAX_POTENTIAL_PHASE {
            return Err(WavefieldError::Unstable { phase, limit: MAX_POTENTIAL_PHASE });
        }
        let half_kick = v.iter().map(|&vi| Complex64::from_polar(1.0, -0.5 * vi * dt / hbar)).collect();
        let kinetic = (0..grid.len())
            .map(|j| {
                let k = grid.wavenumber(j);
                Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * mass))
            })
            .collect();
        Ok(Self { grid, dt, half_kick, kinetic, spectral: Spectral::new(grid.len()) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut WaveFunction1D) {
        let amps = &mut psi.amplitudes;
        amps.iter_mut().zip(&self.half_kick).for_each(|(z, k)| *z *= k);
        self.spectral.forward(amps);
        amps.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.spectral.inverse(amps);
        amps.iter_mut().zip(&self.half_kick).for_each(|(z, k)| *z *= k);
        psi.time += self.dt;
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
}

/// Checks that the packet fits the periodic box with room to spare.
pub fn check_domain(psi: &WaveFunction1D) -> Result<()> {
    let spread = psi.position_variance().sqrt();
    let needed = WIDTHS_PER_DOMAIN * spread;
    let length = psi.grid().length();
    if needed > length {
        return Err(WavefieldError::DomainTooSmall { spread, needed, length });
    }
    Ok(())
}

/// Advances `psi` by `steps` split-step updates of size `dt`.
pub fn propagate(psi: &WaveFunction1D, potential: &Potential1D, dt: f64, steps: usize) -> Result<WaveFunction1D> {
    check_domain(psi)?;
    let prop = SplitStepPropagator::new(*psi.grid(), potential, psi.mass(), psi.hbar(), dt)?;
    let t0 = psi.time();
    let mut out = psi.clone();
    for _ in 0..steps {
        prop.step(&mut out);
    }
    // Recompute the clock from the step count so long runs do not drift.
    out.time = t0 + steps as f64 * dt;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(1.0, 1.0, 16).is_err());
        assert!(Grid1D::new(0.0, 1.0, 7).is_err());
        assert!(Grid1D::new(0.0, f64::NAN, 16).is_err());
        let g = Grid1D::new(-20.0, 20.0, 1024).unwrap();
        assert!((g.dx() * 1024.0 - 40.0).abs() < 40.0 * 1e-12);
        assert!((g.x(1023) + g.dx() - g.x_max()).abs() < 1e-12);
    }

    #[test]
    fn normalize_uniform_is_identity() {
        let g = Grid1D::new(0.0, 1.0, 100).unwrap();
        let psi = WaveFunction1D::new(g, vec![c(1.0); 100], 1.0, 1.0).unwrap().normalize().unwrap();
        for z in psi.amplitudes() {
            assert!((z - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_removes_scale() {
        let g = Grid1D::standard();
        let base = WaveFunction1D::gaussian(g, 0.3, 0.0, 1.0, 1.0, 1.0).unwrap();
        let scaled = base.clone().scaled(c(7.0)).normalize().unwrap();
        assert!((scaled.norm_squared() - 1.0).abs() < 1e-12);
        for (a, b) in base.amplitudes().iter().zip(scaled.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero() {
        let g = Grid1D::standard();
        let psi = WaveFunction1D::new(g, vec![c(0.0); g.len()], 1.0, 1.0).unwrap();
        let err = psi.normalize().unwrap_err();
        assert_eq!(err, WavefieldError::Degenerate);
        assert_eq!(err.to_string(), "degenerate wavefunction");
    }

    #[test]
    fn construction_rejects_bad_input() {
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        assert!(matches!(
            WaveFunction1D::new(g, vec![c(1.0); 7], 1.0, 1.0),
            Err(WavefieldError::LengthMismatch { .. })
        ));
        let mut v = vec![c(1.0); 8];
        v[3] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(WaveFunction1D::new(g, v, 1.0, 1.0), Err(WavefieldError::NonFinite(3)));
        assert!(WaveFunction1D::new(g, vec![c(1.0); 8], -1.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_density_matches_closed_form() {
        let g = Grid1D::standard();
        let psi = WaveFunction1D::gaussian(g, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let rho = psi.density();
        let norm = 1.0 / PI.sqrt();
        for (x, r) in g.points().zip(&rho) {
            assert!((r - norm * (-x * x).exp()).abs() < 1e-12);
        }
        let imax = rho.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(g.x(imax), 0.0);
        assert!((rho.iter().sum::<f64>() * g.dx() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn plane_wave_phase_does_not_change_density() {
        let g = Grid1D::standard();
        let a = WaveFunction1D::gaussian(g, 1.0, 0.0, 0.8, 1.0, 1.0).unwrap();
        let b = WaveFunction1D::gaussian(g, 1.0, 3.0, 0.8, 1.0, 1.0).unwrap();
        for (ra, rb) in a.density().iter().zip(b.density()) {
            assert!((ra - rb).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let g = Grid1D::new(0.0, 2.0 * PI, 64).unwrap();
        let s = Spectral::new(64);
        let vals: Vec<_> = g.points().map(|x| c((3.0 * x).sin())).collect();
        let d1 = s.derivative(&g, &vals, 1);
        let d2 = s.derivative(&g, &vals, 2);
        for (i, x) in g.points().enumerate() {
            assert!((d1[i].re - 3.0 * (3.0 * x).cos()).abs() < 1e-11);
            assert!((d2[i].re + 9.0 * (3.0 * x).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn propagation_preserves_norm_and_clock() {
        let g = Grid1D::standard();
        let psi = WaveFunction1D::gaussian(g, -2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let out = propagate(&psi, &Potential1D::Harmonic { k: 0.5 }, 1e-3, 1000).unwrap();
        assert!((out.norm_squared() - 1.0).abs() < 1e-8);
        assert!((out.time() - 1.0).abs() < 1e-15);
        assert!(out.amplitudes().iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn propagation_checks_preconditions() {
        let g = Grid1D::standard();
        let psi = WaveFunction1D::gaussian(g, 0.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(propagate(&psi, &Potential1D::Free, 0.0, 1), Err(WavefieldError::InvalidParameter(_))));
        assert!(matches!(
            propagate(&psi, &Potential1D::Harmonic { k: 1.0 }, 0.1, 1),
            Err(WavefieldError::Unstable { .. })
        ));
        let wide = WaveFunction1D::gaussian(g, 0.0, 0.0, 0.005, 1.0, 1.0).unwrap();
        assert!(matches!(propagate(&wide, &Potential1D::Free, 1e-3, 1), Err(WavefieldError::DomainTooSmall { .. })));
    }

    #[test]
    fn sampled_potential_interpolates() {
        let g = Grid1D::standard();
        let samples = Potential1D::Harmonic { k: 2.0 }.values(&g).unwrap();
        let pot = Potential1D::Samples(samples);
        for x in [-3.3, 0.01, 1.77] {
            assert!((pot.value_at(&g, x) - x * x).abs() < 1e-12);
        }
        assert!(Potential1D::Samples(vec![0.0; 3]).values(&g).is_err());
    }
}
