//! C interface to the reduced two-detector model and its ensembles.
//!
//! Every fallible function returns a [`PwStatus`]; on failure the message
//! is kept per thread and can be read with [`pw_last_error`]. Trajectories
//! are opaque handles released with [`pw_trajectory_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pilotwave::ensemble::{self, EnsembleStats, Outcome};
use pilotwave::experiment::{self, DetectorState, ExperimentConfig, PairTrajectory};
use pilotwave::retarded::{self, RetardedConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwOutcome {
    Left = 0,
    Right = 1,
    Both = 2,
    Neither = 3,
    Ambiguous = 4,
}

impl From<Outcome> for PwOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Left => PwOutcome::Left,
            Outcome::Right => PwOutcome::Right,
            Outcome::Both => PwOutcome::Both,
            Outcome::Neither => PwOutcome::Neither,
            Outcome::Ambiguous => PwOutcome::Ambiguous,
        }
    }
}

/// Experiment parameters in code units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwExperimentConfig {
    pub a: f64,
    pub p: f64,
    pub m: f64,
    pub l: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl From<&PwExperimentConfig> for ExperimentConfig {
    fn from(c: &PwExperimentConfig) -> Self {
        ExperimentConfig { a: c.a, p: c.p, m: c.m, l: c.l, c_light: None, t_final: c.t_final, dt: c.dt }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PwEnsembleStats {
    pub n: u64,
    pub frac_left: f64,
    pub frac_right: f64,
    pub frac_both: f64,
    pub frac_neither: f64,
    pub frac_ambiguous: f64,
    pub wrong_fraction: f64,
    pub rng_seed: u64,
}

impl From<&EnsembleStats> for PwEnsembleStats {
    fn from(s: &EnsembleStats) -> Self {
        PwEnsembleStats {
            n: s.n as u64,
            frac_left: s.frac_left,
            frac_right: s.frac_right,
            frac_both: s.frac_both,
            frac_neither: s.frac_neither,
            frac_ambiguous: s.frac_ambiguous,
            wrong_fraction: s.wrong_fraction,
            rng_seed: s.rng_seed,
        }
    }
}

/// Opaque pair trajectory.
pub struct PwTrajectory(PairTrajectory);

/// One sample of a pair trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PwSample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub u_dot: f64,
    pub v_dot: f64,
}

/// Position of the other particle at time `t`; write it to `out` and
/// return `true`, or return `false` when `t` is not covered.
pub type PwPositionFn = Option<extern "C" fn(t: f64, user: *mut c_void, out: *mut f64) -> bool>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: PwStatus, msg: impl Into<String>) -> PwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guarded(f: impl FnOnce() -> PwStatus) -> PwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == PwStatus::Ok {
                LAST_ERROR.with(|e| e.borrow_mut().clear());
            }
            status
        }
        Err(_) => fail(PwStatus::Panic, "internal panic"),
    }
}

/// Writes `value` through `out`.
///
/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn put<T>(out: *mut T, value: T) -> PwStatus {
    if out.is_null() {
        return fail(PwStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    PwStatus::Ok
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pw_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn pw_experiment_config_default() -> PwExperimentConfig {
    let d = ExperimentConfig::default();
    PwExperimentConfig { a: d.a, p: d.p, m: d.m, l: d.l, t_final: d.t_final, dt: d.dt }
}

/// Instantaneous reduced velocities at `(u, v, t)`.
///
/// # Safety
/// Output pointers must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pw_pair_velocity(u: f64, v: f64, t: f64, u_dot: *mut f64, v_dot: *mut f64) -> PwStatus {
    guarded(|| {
        if u_dot.is_null() || v_dot.is_null() {
            return fail(PwStatus::NullPointer, "output pointer is null");
        }
        let (du, dv) = experiment::pair_velocity(DetectorState { u, v, t });
        put(u_dot, du);
        put(v_dot, dv)
    })
}

/// Residual of the closed-form implicit solution for `u(t)`.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_implicit_residual(u: f64, t: f64, u0: f64, v0: f64, out: *mut f64) -> PwStatus {
    guarded(|| put(out, experiment::implicit_solution_residual(u, t, u0, v0)))
}

#[no_mangle]
pub extern "C" fn pw_classify(final_u_dot: f64, final_v_dot: f64) -> PwOutcome {
    ensemble::classify(final_u_dot, final_v_dot).into()
}

/// Dimensionless wrongness parameter `l ħ / (m c λ d)` in SI units.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_wrongness_parameter(
    l: f64,
    m: f64,
    d: f64,
    lambda: f64,
    hbar: f64,
    c: f64,
    out: *mut f64,
) -> PwStatus {
    guarded(|| match retarded::wrongness_parameter(l, m, d, lambda, hbar, c) {
        Ok(x) => put(out, x),
        Err(e) => fail(PwStatus::InvalidArgument, e.to_string()),
    })
}

/// Emission time on the light cone of `(t_i, x_i)` for a source whose
/// position is given by `other`.
///
/// # Safety
/// `out` must be null or valid for a write; `other` is called with `user`.
#[no_mangle]
pub unsafe extern "C" fn pw_retarded_time(
    t_i: f64,
    x_i: f64,
    other: PwPositionFn,
    user: *mut c_void,
    c: f64,
    out: *mut f64,
) -> PwStatus {
    guarded(|| {
        let Some(f) = other else {
            return fail(PwStatus::NullPointer, "position callback is null");
        };
        let lookup = |t: f64| {
            let mut x = f64::NAN;
            (f(t, user, &mut x) && x.is_finite()).then_some(x)
        };
        match retarded::retarded_time(t_i, x_i, lookup, c) {
            Ok(t) => put(out, t),
            Err(retarded::RetardedError::InvalidArgument(m)) => fail(PwStatus::InvalidArgument, m),
            Err(e) => fail(PwStatus::Numerical, e.to_string()),
        }
    })
}

unsafe fn config(cfg: *const PwExperimentConfig) -> Result<ExperimentConfig, PwStatus> {
    match cfg.as_ref() {
        Some(c) => Ok(c.into()),
        None => Err(fail(PwStatus::NullPointer, "config pointer is null")),
    }
}

fn hand_out(tr: PairTrajectory, out: *mut *mut PwTrajectory) -> PwStatus {
    let handle = Box::into_raw(Box::new(PwTrajectory(tr)));
    // SAFETY: `out` checked non-null by the callers
    unsafe { out.write(handle) };
    PwStatus::Ok
}

/// Integrates the instantaneous pair equations from `(u0, v0)`.
///
/// # Safety
/// `cfg` must be null or valid; `out` must be null or valid for a write.
/// The handle written to `out` must be released with `pw_trajectory_free`.
#[no_mangle]
pub unsafe extern "C" fn pw_integrate_pair(
    cfg: *const PwExperimentConfig,
    u0: f64,
    v0: f64,
    out: *mut *mut PwTrajectory,
) -> PwStatus {
    guarded(|| {
        let cfg = match config(cfg) {
            Ok(c) => c,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PwStatus::NullPointer, "output pointer is null");
        }
        match experiment::integrate_pair(u0, v0, &cfg) {
            Ok(tr) => hand_out(tr, out),
            Err(experiment::ExperimentError::InvalidConfig(m)) => fail(PwStatus::InvalidArgument, m),
            Err(e) => fail(PwStatus::Numerical, e.to_string()),
        }
    })
}

/// Integrates the retarded pair equations with delay `delay`.
///
/// # Safety
/// As for [`pw_integrate_pair`].
#[no_mangle]
pub unsafe extern "C" fn pw_integrate_retarded(
    cfg: *const PwExperimentConfig,
    delay: f64,
    u0: f64,
    v0: f64,
    out: *mut *mut PwTrajectory,
) -> PwStatus {
    guarded(|| {
        let base = match config(cfg) {
            Ok(c) => c,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PwStatus::NullPointer, "output pointer is null");
        }
        let rcfg = match RetardedConfig::new(base, delay) {
            Ok(r) => r,
            Err(e) => return fail(PwStatus::InvalidArgument, e.to_string()),
        };
        match retarded::integrate_retarded(u0, v0, &rcfg) {
            Ok(tr) => hand_out(tr, out),
            Err(e) => fail(PwStatus::Numerical, e.to_string()),
        }
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_len(tr: *const PwTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.len())
}

/// Sample `index` of the trajectory.
///
/// # Safety
/// `tr` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_get(tr: *const PwTrajectory, index: usize, out: *mut PwSample) -> PwStatus {
    guarded(|| {
        let Some(t) = tr.as_ref() else {
            return fail(PwStatus::NullPointer, "trajectory handle is null");
        };
        let t = &t.0;
        if index >= t.len() {
            return fail(PwStatus::OutOfRange, format!("index {index} out of range for {} samples", t.len()));
        }
        put(
            out,
            PwSample { t: t.times[index], u: t.u[index], v: t.v[index], u_dot: t.u_dot[index], v_dot: t.v_dot[index] },
        )
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `tr` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_free(tr: *mut PwTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

unsafe fn ensemble_result(r: ensemble::Result<ensemble::EnsembleReport>, out: *mut PwEnsembleStats) -> PwStatus {
    match r {
        Ok(rep) => put(out, (&rep.stats).into()),
        Err(e @ ensemble::EnsembleError::Invalid(_)) => fail(PwStatus::InvalidArgument, e.to_string()),
        Err(e) => fail(PwStatus::Numerical, e.to_string()),
    }
}

/// Born-sampled ensemble with the instantaneous law.
///
/// # Safety
/// `cfg` must be null or valid; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_run_nonretarded_ensemble(
    cfg: *const PwExperimentConfig,
    n: usize,
    seed: u64,
    out: *mut PwEnsembleStats,
) -> PwStatus {
    guarded(|| {
        let cfg = match config(cfg) {
            Ok(c) => c,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PwStatus::NullPointer, "output pointer is null");
        }
        ensemble_result(ensemble::run_nonretarded_ensemble(n, seed, &cfg), out)
    })
}

/// Born-sampled ensemble with the retarded law.
///
/// # Safety
/// As for [`pw_run_nonretarded_ensemble`].
#[no_mangle]
pub unsafe extern "C" fn pw_run_retarded_ensemble(
    cfg: *const PwExperimentConfig,
    delay: f64,
    n: usize,
    seed: u64,
    out: *mut PwEnsembleStats,
) -> PwStatus {
    guarded(|| {
        let base = match config(cfg) {
            Ok(c) => c,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PwStatus::NullPointer, "output pointer is null");
        }
        let rcfg = match RetardedConfig::new(base, delay) {
            Ok(r) => r,
            Err(e) => return fail(PwStatus::InvalidArgument, e.to_string()),
        };
        ensemble_result(ensemble::run_retarded_ensemble(n, seed, &rcfg), out)
    })
}
