//! Born-rule ensembles of detector start positions and outcome statistics.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)` on stream 0. Start coordinates are drawn in index
//! order, `u0` then `v0` for each run, as normal deviates (`rand_distr`
//! ziggurat) with variance `1/(2a)`. Runs are integrated in parallel and
//! reduced in index order, so the thread count never changes a result.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{integrate_pair, ExperimentConfig, ExperimentError, FIRE_THRESHOLD, SILENT_THRESHOLD};
use crate::retarded::{integrate_retarded, RetardedConfig, RetardedError};

/// Largest tolerated share of ambiguous outcomes in a sampled ensemble.
pub const MAX_AMBIGUOUS_FRACTION: f64 = 1e-3;

/// Minimum classification time for retarded runs.
pub const MIN_T_FINAL: f64 = 10.0;

/// Extra classification time granted to runs with a nonzero delay.
pub const DELAY_SETTLE_TIME: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble request: {0}")]
    Invalid(String),
    #[error("run {index} (u0 = {u0}, v0 = {v0}) failed: {message}")]
    Integration { index: usize, u0: f64, v0: f64, message: String },
    #[error("{count} of {n} runs ended ambiguous (limit {limit})")]
    TooManyAmbiguous { count: usize, n: usize, limit: f64 },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Retarded(#[from] RetardedError),
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Left,
    Right,
    Both,
    Neither,
    Ambiguous,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Left => "Left",
            Outcome::Right => "Right",
            Outcome::Both => "Both",
            Outcome::Neither => "Neither",
            Outcome::Ambiguous => "Ambiguous",
        }
    }

    /// Both or neither detector fired.
    pub fn is_wrong(&self) -> bool {
        matches!(self, Outcome::Both | Outcome::Neither)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Detector {
    Fired,
    Silent,
    Undecided,
}

fn detector_state(velocity: f64) -> Detector {
    if velocity > FIRE_THRESHOLD {
        Detector::Fired
    } else if velocity < SILENT_THRESHOLD {
        Detector::Silent
    } else {
        Detector::Undecided
    }
}

/// Classifies a run from the final reduced velocities; `u` is the right
/// detector, `v` the left one.
pub fn classify(final_u_dot: f64, final_v_dot: f64) -> Outcome {
    use Detector::*;
    match (detector_state(final_u_dot), detector_state(final_v_dot)) {
        (Fired, Silent) => Outcome::Right,
        (Silent, Fired) => Outcome::Left,
        (Fired, Fired) => Outcome::Both,
        (Silent, Silent) => Outcome::Neither,
        _ => Outcome::Ambiguous,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub u0: f64,
    pub v0: f64,
    pub outcome: Outcome,
    pub final_u_dot: f64,
    pub final_v_dot: f64,
    /// Delay used; `0` for non-retarded runs.
    #[serde(rename = "T")]
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub frac_left: f64,
    pub frac_right: f64,
    pub frac_both: f64,
    pub frac_neither: f64,
    pub frac_ambiguous: f64,
    pub wrong_fraction: f64,
    pub rng_seed: u64,
}

impl EnsembleStats {
    pub fn from_records(records: &[OutcomeRecord], rng_seed: u64) -> Self {
        let n = records.len();
        let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
        let (left, right, both, neither) =
            (count(Outcome::Left), count(Outcome::Right), count(Outcome::Both), count(Outcome::Neither));
        let ambiguous = n - left - right - both - neither;
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self {
            n,
            frac_left: frac(left),
            frac_right: frac(right),
            frac_both: frac(both),
            frac_neither: frac(neither),
            frac_ambiguous: frac(ambiguous),
            wrong_fraction: frac(both + neither),
            rng_seed,
        }
    }

    /// Binomial standard error of `wrong_fraction`.
    pub fn wrong_fraction_std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.wrong_fraction * (1.0 - self.wrong_fraction) / self.n as f64).sqrt()
    }
}

/// Statistics together with the per-run records they were reduced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub stats: EnsembleStats,
    pub records: Vec<OutcomeRecord>,
}

/// Draws `n` independent `(u0, v0)` pairs from `|ψ|² ∝ exp(-a x²)`.
pub fn sample_initial(rng_seed: u64, n: usize, a: f64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(EnsembleError::Invalid("n must be at least 1".into()));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(EnsembleError::Invalid(format!("a must be positive, got {a}")));
    }
    let normal = Normal::new(0.0, (0.5 / a).sqrt()).map_err(|e| EnsembleError::Invalid(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    Ok((0..n).map(|_| (normal.sample(&mut rng), normal.sample(&mut rng))).collect())
}

fn check_code_units(cfg: &ExperimentConfig) -> Result<()> {
    if !cfg.is_code_units() {
        return Err(EnsembleError::Invalid(format!(
            "reduced dynamics need a = 1 and p = m (got a = {}, p = {}, m = {}); rescale first",
            cfg.a, cfg.p, cfg.m
        )));
    }
    Ok(())
}

fn collect_records<F>(pairs: &[(f64, f64)], delay: f64, run: F) -> Result<Vec<OutcomeRecord>>
where
    F: Fn(f64, f64) -> std::result::Result<(f64, f64), String> + Sync,
{
    pairs
        .par_iter()
        .enumerate()
        .map(|(index, &(u0, v0))| {
            let (du, dv) = run(u0, v0).map_err(|message| EnsembleError::Integration { index, u0, v0, message })?;
            Ok(OutcomeRecord { u0, v0, outcome: classify(du, dv), final_u_dot: du, final_v_dot: dv, delay })
        })
        .collect()
}

/// Non-retarded outcomes for explicit start coordinates (code units).
pub fn evaluate_nonretarded(pairs: &[(f64, f64)], cfg: &ExperimentConfig) -> Result<Vec<OutcomeRecord>> {
    cfg.validate()?;
    collect_records(pairs, 0.0, |u0, v0| {
        let tr = integrate_pair(u0, v0, cfg).map_err(|e| e.to_string())?;
        tr.final_velocities().ok_or_else(|| "empty trajectory".to_string())
    })
}

/// Retarded outcomes for explicit start coordinates (code units). See
/// [`classification_config`] for the classification time.
pub fn evaluate_retarded(pairs: &[(f64, f64)], cfg: &RetardedConfig) -> Result<Vec<OutcomeRecord>> {
    let cfg = classification_config(cfg);
    cfg.validate()?;
    collect_records(pairs, cfg.delay, |u0, v0| {
        let hist = integrate_retarded(u0, v0, &cfg).map_err(|e| e.to_string())?;
        hist.final_velocities().ok_or_else(|| "empty trajectory".to_string())
    })
}

/// `cfg` with `t_final` raised to `max(t_final, 10, 3T)`, plus a further
/// [`DELAY_SETTLE_TIME`] when `T > 0`.
///
/// Runs starting near the delayed separatrix settle slowly once the other
/// detector's history arrives; at `t = 10` a few tenths of a percent of a
/// Born-sampled ensemble are still in transit for `T` near 1.
pub fn classification_config(cfg: &RetardedConfig) -> RetardedConfig {
    let mut out = *cfg;
    let mut t = cfg.base.t_final.max(MIN_T_FINAL).max(3.0 * cfg.delay);
    if cfg.delay > 0.0 {
        t += DELAY_SETTLE_TIME;
    }
    out.base.t_final = t;
    out
}

fn finish(records: Vec<OutcomeRecord>, seed: u64) -> Result<EnsembleReport> {
    let stats = EnsembleStats::from_records(&records, seed);
    if stats.frac_ambiguous > MAX_AMBIGUOUS_FRACTION {
        let count = records.iter().filter(|r| r.outcome == Outcome::Ambiguous).count();
        return Err(EnsembleError::TooManyAmbiguous { count, n: stats.n, limit: MAX_AMBIGUOUS_FRACTION });
    }
    Ok(EnsembleReport { stats, records })
}

/// Integrates `n` Born-sampled pairs with the instantaneous law.
pub fn run_nonretarded_ensemble(n: usize, seed: u64, cfg: &ExperimentConfig) -> Result<EnsembleReport> {
    check_code_units(cfg)?;
    let pairs = sample_initial(seed, n, cfg.a)?;
    finish(evaluate_nonretarded(&pairs, cfg)?, seed)
}

/// Integrates `n` Born-sampled pairs with the retarded law.
pub fn run_retarded_ensemble(n: usize, seed: u64, cfg: &RetardedConfig) -> Result<EnsembleReport> {
    check_code_units(&cfg.base)?;
    let pairs = sample_initial(seed, n, cfg.base.a)?;
    finish(evaluate_retarded(&pairs, cfg)?, seed)
}

/// Retarded ensembles over a list of delays, all from the same seed.
pub fn sweep_delay(delays: &[f64], n: usize, seed: u64, base: &ExperimentConfig) -> Result<Vec<(f64, EnsembleStats)>> {
    if let Some(bad) = delays.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(EnsembleError::Invalid(format!("delays must be nonnegative, got {bad}")));
    }
    delays
        .iter()
        .map(|&delay| {
            let cfg = RetardedConfig::new(*base, delay)?;
            Ok((delay, run_retarded_ensemble(n, seed, &cfg)?.stats))
        })
        .collect()
}
