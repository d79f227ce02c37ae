//! Command-line configuration and pipelines.
//!
//! A run is described by a flat JSON object (or the same keys as flags).
//! Flags override file values. Results are a versioned JSON summary plus
//! headered CSV files; every file lands through write-then-rename.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ensemble::{
    evaluate_nonretarded, evaluate_retarded, run_nonretarded_ensemble, run_retarded_ensemble, sample_initial,
    sweep_delay, EnsembleReport, EnsembleStats, Outcome, OutcomeRecord,
};
use crate::equivariance::{run_equivariance, EquivarianceParams};
use crate::experiment::{implicit_solution_residual, integrate_pair, ExperimentConfig, PairTrajectory};
use crate::retarded::{integrate_retarded, wrongness_parameter, RetardedConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Pass threshold for `oracle_check`.
pub const ORACLE_LIMIT: f64 = 1e-6;

pub const DEFAULT_T_LIST: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

/// CODATA reduced Planck constant, J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const C_SI: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Equivariance,
    Nonretarded,
    Retarded,
    Sweep,
    OracleCheck,
    PhysicalUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Dimensionless units with ħ = 1.
    Code,
    /// SI units; only used by `physical_units`.
    Si,
}

/// Command-line flags. Every value may also come from `--config`.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "pilotwave", version, about = "Pilot-wave trajectories and the retarded two-detector experiment")]
pub struct Cli {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// JSON config, or a summary written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RNG seed for Born sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Born-sampled runs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Retardation delay (retarded mode).
    #[arg(long = "T")]
    pub delay: Option<f64>,
    /// Comma-separated delays for the sweep.
    #[arg(long = "T-list", value_delimiter = ',', num_args = 1..)]
    pub delays: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    /// Detector half-separation.
    #[arg(long)]
    pub l: Option<f64>,
    /// Signal speed; sets T = 2l/c.
    #[arg(long)]
    pub c: Option<f64>,
    /// Detector mass.
    #[arg(long)]
    pub m: Option<f64>,
    /// Photon momentum.
    #[arg(long)]
    pub p: Option<f64>,
    /// Packet width parameter, |ψ|² ∝ exp(-a x²).
    #[arg(long)]
    pub a: Option<f64>,
    /// Spatial spread of the detector state (SI units).
    #[arg(long)]
    pub d: Option<f64>,
    /// Reduced photon wavelength, p = ħ/λ (SI units).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Reduced Planck constant (SI units).
    #[arg(long)]
    pub hbar: Option<f64>,
    /// Forced start of the right detector (with --v0).
    #[arg(long)]
    pub u0: Option<f64>,
    /// Forced start of the left detector (with --u0).
    #[arg(long)]
    pub v0: Option<f64>,
    /// End of the integration window.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Integrator step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write trajectory.csv for forced runs.
    #[arg(long = "emit-trajectories")]
    pub emit_trajectories: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub parallel: Option<usize>,
}

/// Keys accepted in a config file, with the flag each mirrors.
pub const CONFIG_KEYS: [&str; 22] = [
    "mode",
    "seed",
    "n",
    "T",
    "T_list",
    "units",
    "l",
    "c",
    "m",
    "p",
    "a",
    "d",
    "lambda",
    "hbar",
    "u0",
    "v0",
    "t_final",
    "dt",
    "out",
    "emit_trajectories",
    "parallel",
    "config",
];

const CODE_ONLY: [&str; 6] = ["a", "p", "T", "T_list", "u0", "v0"];
const SI_ONLY: [&str; 3] = ["d", "lambda", "hbar"];

/// Values as supplied, before defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    #[serde(rename = "T_list", skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit_trajectories: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel: Option<usize>,
}

impl RawConfig {
    /// Parses a config object, rejecting unknown keys. A run summary is
    /// accepted too: its `config` member is used.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        if obj.contains_key("schema_version") {
            match obj.remove("config") {
                Some(Value::Object(inner)) => obj = inner,
                _ => return Err(CliError::Config("summary file has no config object".into())),
            }
        }
        let unknown: Vec<&str> = obj.keys().map(String::as_str).filter(|k| !CONFIG_KEYS.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        obj.remove("config");
        serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `self` with every value present in `over` replaced.
    pub fn merged(self, over: RawConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            mode,
            seed,
            n,
            delay,
            delays,
            units,
            l,
            c,
            m,
            p,
            a,
            d,
            lambda,
            hbar,
            u0,
            v0,
            t_final,
            dt,
            out,
            emit_trajectories,
            parallel
        )
    }

    fn present_keys(&self) -> Vec<&'static str> {
        let v = serde_json::to_value(self).unwrap_or(Value::Null);
        let Value::Object(obj) = v else { return Vec::new() };
        CONFIG_KEYS.iter().copied().filter(|k| obj.contains_key(*k)).collect()
    }
}

impl From<&Cli> for RawConfig {
    fn from(cli: &Cli) -> Self {
        RawConfig {
            mode: cli.mode,
            seed: cli.seed,
            n: cli.n,
            delay: cli.delay,
            delays: cli.delays.clone(),
            units: cli.units,
            l: cli.l,
            c: cli.c,
            m: cli.m,
            p: cli.p,
            a: cli.a,
            d: cli.d,
            lambda: cli.lambda,
            hbar: cli.hbar,
            u0: cli.u0,
            v0: cli.v0,
            t_final: cli.t_final,
            dt: cli.dt,
            out: cli.out.clone(),
            emit_trajectories: cli.emit_trajectories.then_some(true),
            parallel: cli.parallel,
        }
    }
}

/// SI inputs of the wrong-result screening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub l: f64,
    pub m: f64,
    pub d: f64,
    pub lambda: f64,
    pub hbar: f64,
    pub c: f64,
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub n_samples: usize,
    pub experiment: ExperimentConfig,
    pub delay: Option<f64>,
    pub delays: Vec<f64>,
    pub forced: Option<(f64, f64)>,
    pub physical: Option<PhysicalParams>,
    pub output_path: Option<PathBuf>,
    pub emit_trajectories: bool,
    pub parallel: Option<usize>,
    /// The supplied values, echoed into the summary.
    pub raw: RawConfig,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Applies defaults and validates `raw` for its mode.
pub fn parse_config(raw: RawConfig) -> Result<RunConfig> {
    let mode = raw.mode.ok_or_else(|| CliError::Config("mode is required".into()))?;
    let default_units = if mode == Mode::PhysicalUnits { Units::Si } else { Units::Code };
    let units = raw.units.unwrap_or(default_units);
    let present = raw.present_keys();
    let (forbidden, label): (&[&str], _) = match units {
        Units::Code => (&SI_ONLY, "SI-only"),
        Units::Si => (&CODE_ONLY, "code-unit-only"),
    };
    let mixed: Vec<&str> = present.iter().copied().filter(|k| forbidden.contains(k)).collect();
    if !mixed.is_empty() {
        return Err(CliError::Config(format!(
            "physical-units and code-units parameters mixed: {label} keys {} given with {units:?} units",
            mixed.join(", ")
        )));
    }
    if (mode == Mode::PhysicalUnits) != (units == Units::Si) {
        return Err(CliError::Config(format!("mode {mode:?} cannot run in {units:?} units")));
    }
    if raw.parallel == Some(0) {
        return Err(CliError::Config("parallel must be at least 1".into()));
    }

    let mut cfg = RunConfig {
        mode,
        seed: raw.seed.unwrap_or(0),
        n_samples: 0,
        experiment: ExperimentConfig::default(),
        delay: None,
        delays: Vec::new(),
        forced: None,
        physical: None,
        output_path: raw.out.clone(),
        emit_trajectories: raw.emit_trajectories.unwrap_or(false),
        parallel: raw.parallel,
        raw: raw.clone(),
    };

    if mode == Mode::PhysicalUnits {
        let need =
            |name: &str, v: Option<f64>| v.ok_or_else(|| CliError::Config(format!("{name} is required in SI units")));
        let phys = PhysicalParams {
            l: positive("l", need("l", raw.l)?)?,
            m: positive("m", need("m", raw.m)?)?,
            d: positive("d", need("d", raw.d)?)?,
            lambda: positive("lambda", need("lambda", raw.lambda)?)?,
            hbar: positive("hbar", raw.hbar.unwrap_or(HBAR_SI))?,
            c: positive("c", raw.c.unwrap_or(C_SI))?,
        };
        cfg.physical = Some(phys);
        return Ok(cfg);
    }

    let (default_p, default_t, default_n) = match mode {
        Mode::Equivariance => (0.0, 1.0, 10_000),
        Mode::OracleCheck => (1.0, 10.0, 100),
        _ => (1.0, 10.0, 10_000),
    };
    let e = &mut cfg.experiment;
    e.a = positive("a", raw.a.unwrap_or(1.0))?;
    e.m = positive("m", raw.m.unwrap_or(1.0))?;
    e.p = raw.p.unwrap_or(default_p);
    if mode == Mode::Equivariance {
        if !e.p.is_finite() {
            return Err(CliError::Config(format!("p must be finite, got {}", e.p)));
        }
    } else {
        positive("p", e.p)?;
    }
    e.l = positive("l", raw.l.unwrap_or(1.0))?;
    e.c_light = raw.c.map(|c| positive("c", c)).transpose()?;
    e.t_final = positive("t_final", raw.t_final.unwrap_or(default_t))?;
    e.dt = positive("dt", raw.dt.unwrap_or(1e-3))?;
    if e.dt > e.t_final {
        return Err(CliError::Config(format!("dt ({}) larger than t_final ({})", e.dt, e.t_final)));
    }
    cfg.n_samples = raw.n.unwrap_or(default_n);
    if cfg.n_samples == 0 {
        return Err(CliError::Config("n must be at least 1".into()));
    }

    let experiment_mode = matches!(mode, Mode::Nonretarded | Mode::Retarded | Mode::Sweep | Mode::OracleCheck);
    if experiment_mode && !cfg.experiment.is_code_units() {
        return Err(CliError::Config(format!(
            "mode {mode:?} integrates the reduced equations and needs a = 1 and p = m"
        )));
    }

    match (raw.u0, raw.v0) {
        (Some(u0), Some(v0)) if u0.is_finite() && v0.is_finite() => cfg.forced = Some((u0, v0)),
        (None, None) => {}
        _ => return Err(CliError::Config("u0 and v0 must be given together and be finite".into())),
    }
    if cfg.forced.is_some() && !matches!(mode, Mode::Nonretarded | Mode::Retarded) {
        return Err(CliError::Config("u0/v0 apply only to nonretarded and retarded modes".into()));
    }

    match mode {
        Mode::Retarded => {
            let delay = match (raw.delay, raw.c) {
                (Some(_), Some(_)) => return Err(CliError::Config("give either T or c, not both".into())),
                (Some(t), None) => t,
                (None, Some(c)) => 2.0 * cfg.experiment.l / c,
                (None, None) => return Err(CliError::Config("retarded mode needs T, or l and c".into())),
            };
            if !(delay >= 0.0 && delay.is_finite()) {
                return Err(CliError::Config(format!("T must be nonnegative and finite, got {delay}")));
            }
            cfg.delay = Some(delay);
        }
        Mode::Sweep => {
            let delays = raw.delays.clone().unwrap_or_else(|| DEFAULT_T_LIST.to_vec());
            if delays.is_empty() {
                return Err(CliError::Config("T_list must not be empty".into()));
            }
            if let Some(bad) = delays.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
                return Err(CliError::Config(format!("T_list entries must be nonnegative, got {bad}")));
            }
            cfg.delays = delays;
        }
        _ => {
            if raw.delay.is_some() || raw.delays.is_some() {
                return Err(CliError::Config(format!("T / T_list do not apply to mode {mode:?}")));
            }
        }
    }
    Ok(cfg)
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

fn csv_bytes<F>(header: &[&str], rows: usize, mut row: F) -> Result<Vec<u8>>
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for i in 0..rows {
        w.write_record(row(i)).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn records_csv(records: &[OutcomeRecord]) -> Result<Vec<u8>> {
    csv_bytes(&["index", "u0", "v0", "outcome", "final_u_dot", "final_v_dot", "T"], records.len(), |i| {
        let r = &records[i];
        vec![
            i.to_string(),
            r.u0.to_string(),
            r.v0.to_string(),
            r.outcome.to_string(),
            r.final_u_dot.to_string(),
            r.final_v_dot.to_string(),
            r.delay.to_string(),
        ]
    })
}

fn trajectory_csv(tr: &PairTrajectory) -> Result<Vec<u8>> {
    csv_bytes(&["t", "u", "v", "u_dot", "v_dot"], tr.len(), |i| {
        vec![
            tr.times[i].to_string(),
            tr.u[i].to_string(),
            tr.v[i].to_string(),
            tr.u_dot[i].to_string(),
            tr.v_dot[i].to_string(),
        ]
    })
}

/// Columns of the delay-sweep CSV.
pub const SWEEP_COLUMNS: [&str; 7] =
    ["T", "wrong_fraction", "frac_left", "frac_right", "frac_both", "frac_neither", "n"];

pub fn sweep_csv(rows: &[(f64, EnsembleStats)]) -> Result<Vec<u8>> {
    csv_bytes(&SWEEP_COLUMNS, rows.len(), |i| {
        let (t, s) = &rows[i];
        vec![
            t.to_string(),
            s.wrong_fraction.to_string(),
            s.frac_left.to_string(),
            s.frac_right.to_string(),
            s.frac_both.to_string(),
            s.frac_neither.to_string(),
            s.n.to_string(),
        ]
    })
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Runs `cfg` on a thread pool of the configured size.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cfg.parallel {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_pipeline(cfg))
}

fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let mut derived = Map::new();
    let mut files: BTreeMap<&'static str, Vec<u8>> = BTreeMap::new();

    let result = match cfg.mode {
        Mode::PhysicalUnits => {
            let p = cfg.physical.expect("validated");
            let x = wrongness_parameter(p.l, p.m, p.d, p.lambda, p.hbar, p.c).map_err(numerical)?;
            derived.insert("equivalent_T".into(), json!(2.0 * x));
            json!({
                "wrongness_parameter": x,
                "wrong_results_expected": x >= 1.0,
                "inputs": p,
            })
        }
        Mode::Equivariance => {
            let params = EquivarianceParams {
                a: cfg.experiment.a,
                p: cfg.experiment.p,
                mass: cfg.experiment.m,
                t_final: cfg.experiment.t_final,
                dt: cfg.experiment.dt,
                n_samples: cfg.n_samples,
                seed: cfg.seed,
                ..Default::default()
            };
            let rep = run_equivariance(&params).map_err(numerical)?;
            files.insert(
                "samples.csv",
                csv_bytes(&["index", "x0", "x_final"], rep.n_samples, |i| {
                    vec![i.to_string(), rep.initial_positions[i].to_string(), rep.final_positions[i].to_string()]
                })?,
            );
            json!({
                "ks_distance": rep.ks_distance,
                "ks_limit": rep.ks_limit,
                "passed": rep.passed,
                "n": rep.n_samples,
                "t_final": rep.t_final,
            })
        }
        Mode::Nonretarded | Mode::Retarded => {
            let retarded = match cfg.delay {
                Some(delay) => {
                    Some(RetardedConfig::new(cfg.experiment, delay).map_err(|e| CliError::Config(e.to_string()))?)
                }
                None => None,
            };
            if let Some(r) = &retarded {
                derived.insert("T".into(), json!(r.delay));
                derived.insert("t_final_used".into(), json!(crate::ensemble::classification_config(r).base.t_final));
            }
            if let Some((u0, v0)) = cfg.forced {
                let (record, traj) = match &retarded {
                    None => {
                        let tr = integrate_pair(u0, v0, &cfg.experiment).map_err(numerical)?;
                        (evaluate_nonretarded(&[(u0, v0)], &cfg.experiment).map_err(numerical)?[0], tr)
                    }
                    Some(r) => {
                        let used = crate::ensemble::classification_config(r);
                        let tr = integrate_retarded(u0, v0, &used).map_err(numerical)?;
                        (evaluate_retarded(&[(u0, v0)], r).map_err(numerical)?[0], tr)
                    }
                };
                if cfg.emit_trajectories {
                    files.insert("trajectory.csv", trajectory_csv(&traj)?);
                }
                files.insert("samples.csv", records_csv(std::slice::from_ref(&record))?);
                json!({ "record": record, "stats": EnsembleStats::from_records(&[record], cfg.seed) })
            } else {
                let report: EnsembleReport = match &retarded {
                    None => run_nonretarded_ensemble(cfg.n_samples, cfg.seed, &cfg.experiment),
                    Some(r) => run_retarded_ensemble(cfg.n_samples, cfg.seed, r),
                }
                .map_err(numerical)?;
                files.insert("samples.csv", records_csv(&report.records)?);
                let sign_law_violations =
                    report.records.iter().filter(|r| (r.outcome == Outcome::Right) != (r.u0 > r.v0)).count();
                json!({ "stats": report.stats, "sign_law_violations": sign_law_violations })
            }
        }
        Mode::Sweep => {
            let rows = sweep_delay(&cfg.delays, cfg.n_samples, cfg.seed, &cfg.experiment).map_err(numerical)?;
            files.insert("sweep.csv", sweep_csv(&rows)?);
            let list: Vec<Value> = rows.iter().map(|(t, s)| json!({ "T": t, "stats": s })).collect();
            json!({ "sweep": list })
        }
        Mode::OracleCheck => {
            let pairs = sample_initial(cfg.seed, cfg.n_samples, cfg.experiment.a).map_err(numerical)?;
            let mut max_residual = 0.0f64;
            let mut max_conservation = 0.0f64;
            for &(u0, v0) in &pairs {
                let tr = integrate_pair(u0, v0, &cfg.experiment).map_err(numerical)?;
                for i in 0..tr.len() {
                    let t = tr.times[i];
                    max_residual = max_residual.max(implicit_solution_residual(tr.u[i], t, u0, v0).abs());
                    max_conservation = max_conservation.max((tr.u[i] + tr.v[i] - t - u0 - v0).abs());
                }
            }
            json!({
                "max_implicit_residual": max_residual,
                "max_conservation_violation": max_conservation,
                "limit": ORACLE_LIMIT,
                "passed": max_residual < ORACLE_LIMIT,
                "n": pairs.len(),
            })
        }
    };

    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config": cfg.raw,
        "derived": derived,
        "result": result,
        "timing_seconds": started.elapsed().as_secs_f64(),
    });

    let mut written = Vec::new();
    if let Some(dir) = &cfg.output_path {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (name, bytes) in &files {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(RunOutput { summary, files: written })
}

/// Parses flags (and `--config`), runs, and prints the summary when no
/// output directory is given.
pub fn main_with(cli: &Cli) -> Result<RunOutput> {
    let file = match &cli.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let cfg = parse_config(file.merged(RawConfig::from(cli)))?;
    let out = run(&cfg)?;
    if cfg.output_path.is_none() {
        let text = serde_json::to_string_pretty(&out.summary).map_err(|e| CliError::Io(e.to_string()))?;
        println!("{text}");
    }
    Ok(out)
}
