//! Empirical-distribution helpers: grid CDFs, inverse-CDF sampling and
//! the two-sided Kolmogorov-Smirnov distance.

use rand::Rng;

use crate::wavefield::Grid1D;

/// Cumulative distribution of a density sampled on grid nodes, treating
/// each node as the midpoint of a cell of width `dx` with uniform mass.
#[derive(Debug, Clone)]
pub struct GridCdf {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GridCdf {
    pub fn from_density(grid: &Grid1D, density: &[f64]) -> Self {
        let dx = grid.dx();
        let total: f64 = density.iter().sum::<f64>() * dx;
        let mut edges = Vec::with_capacity(density.len() + 1);
        let mut cumulative = Vec::with_capacity(density.len() + 1);
        edges.push(grid.x_min() - 0.5 * dx);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (i, rho) in density.iter().enumerate() {
            acc += rho * dx / total;
            edges.push(grid.x(i) + 0.5 * dx);
            cumulative.push(acc);
        }
        // Pin the last value so round-off cannot leave it short of 1.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { edges, cumulative }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.edges[0] {
            return 0.0;
        }
        let n = self.edges.len();
        if x >= self.edges[n - 1] {
            return 1.0;
        }
        let k = self.edges.partition_point(|&e| e <= x) - 1;
        let w = (x - self.edges[k]) / (self.edges[k + 1] - self.edges[k]);
        self.cumulative[k] + w * (self.cumulative[k + 1] - self.cumulative[k])
    }

    /// Inverse of [`GridCdf::cdf`] for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cumulative.partition_point(|&c| c < u).clamp(1, self.cumulative.len() - 1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.edges[k - 1] + w * (self.edges[k] - self.edges[k - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// `sup_x |F_n(x) - F(x)|` for the samples against a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}
