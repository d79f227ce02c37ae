//! Transport of a `|ψ₀|²`-distributed ensemble along guidance trajectories,
//! compared with `|ψ(t)|²` by the Kolmogorov-Smirnov distance.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::{transport_ensemble, GuidanceError, SnapshotProvider, TrajectoryError};
use crate::stats::{ks_distance, GridCdf};
use crate::wavefield::{propagate, Grid1D, Potential1D, WaveFunction1D, WavefieldError};

/// Pass threshold on the KS distance for `10⁴` samples.
pub const KS_LIMIT: f64 = 0.025;

#[derive(Debug, Error)]
pub enum EquivarianceError {
    #[error(transparent)]
    Wavefield(#[from] WavefieldError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error("sample {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: TrajectoryError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceParams {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// Width parameter of the initial Gaussian.
    pub a: f64,
    /// Initial packet momentum.
    pub p: f64,
    pub mass: f64,
    pub hbar: f64,
    pub t_final: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for EquivarianceParams {
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 1024,
            a: 1.0,
            p: 0.0,
            mass: 1.0,
            hbar: 1.0,
            t_final: 1.0,
            dt: 1e-3,
            n_samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub ks_distance: f64,
    pub ks_limit: f64,
    pub passed: bool,
    pub n_samples: usize,
    pub t_final: f64,
    pub initial_positions: Vec<f64>,
    pub final_positions: Vec<f64>,
}

/// Free Gaussian, samples from `|ψ₀|²`, RK4 transport to `t_final`, KS
/// distance against the grid CDF of `|ψ(t_final)|²`.
pub fn run_equivariance(params: &EquivarianceParams) -> Result<EquivarianceReport, EquivarianceError> {
    let grid = Grid1D::new(params.x_min, params.x_max, params.n_points)?;
    let psi0 = WaveFunction1D::gaussian(grid, 0.0, params.p, params.a, params.mass, params.hbar)?;
    let provider = SnapshotProvider::propagate(&psi0, &Potential1D::Free, params.dt, params.t_final, None, None)?;

    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let starts = GridCdf::from_density(&grid, &psi0.density()).sample(&mut rng, params.n_samples);
    let finals = transport_ensemble(&provider, &starts, 0.0, params.t_final, params.dt)
        .map_err(|(index, source)| EquivarianceError::Trajectory { index, source })?;

    let steps = (params.t_final / params.dt).round() as usize;
    let psi_t = propagate(&psi0, &Potential1D::Free, params.dt, steps)?;
    let target = GridCdf::from_density(&grid, &psi_t.density());
    let d = ks_distance(&finals, |x| target.cdf(x));
    Ok(EquivarianceReport {
        ks_distance: d,
        ks_limit: KS_LIMIT,
        passed: d < KS_LIMIT,
        n_samples: params.n_samples,
        t_final: params.t_final,
        initial_positions: starts,
        final_positions: finals,
    })
}
