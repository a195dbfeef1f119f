//! C ABI for `tcl-mfc`.
//!
//! Problems and policies are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`TclStatus`]; on failure [`tcl_last_error`] describes the cause for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tcl_mfc::experiment::{prepare, run_experiment, DeviationKind, ExperimentConfig, Prepared};
use tcl_mfc::mdp::PolicySequence;
use tcl_mfc::popsim::{count_switches, simulate_population};
use tcl_mfc::solvers::{
    fp_mfg, frank_wolfe, md_mfc, omd_mfg, InitPolicy, SolverConfig, SolverKind, StepSchedule,
};
use tcl_mfc::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    RuntimeError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TclSolver {
    MdMfc = 0,
    FpMfg = 1,
    OmdMfg = 2,
    FrankWolfe = 3,
    Nominal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TclDeviation {
    OneHour = 0,
    EightHour = 1,
}

/// Heater tracking problem: kernel, initial distribution and target.
pub struct TclProblem {
    inner: Prepared,
}

/// Policy sequence `π_n(a|x)`, `n = 1..N`.
pub struct TclPolicy {
    inner: PolicySequence,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> TclStatus {
    match e {
        Error::Config(_) | Error::Json(_) => TclStatus::ConfigError,
        Error::Input(_) => TclStatus::InvalidArgument,
        _ => TclStatus::RuntimeError,
    }
}

fn guard<F: FnOnce() -> Result<(), TclStatus>>(f: F) -> TclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TclStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside tcl-mfc");
            TclStatus::Panic
        }
    }
}

fn lift<T>(r: tcl_mfc::Result<T>) -> Result<T, TclStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> TclStatus {
    set_error(format!("{what} is null"));
    TclStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TclStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        TclStatus::InvalidArgument
    })
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> Result<(), TclStatus> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread; empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tcl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reference heater problem: 200 L tank, deadband [50, 65] °C, 10-minute
/// steps over one day, synthetic drain from `drain_seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_reference(
    drain_seed: u64,
    deviation: TclDeviation,
    amplitude: f64,
    out: *mut *mut TclProblem,
) -> TclStatus {
    guard(|| {
        let cfg = ExperimentConfig {
            deviation: match deviation {
                TclDeviation::OneHour => DeviationKind::OneHour,
                TclDeviation::EightHour => DeviationKind::EightHour,
            },
            deviation_amplitude: amplitude,
            ..reference_config(drain_seed)
        };
        let inner = lift(prepare(&cfg))?;
        out_handle(out, TclProblem { inner })
    })
}

fn reference_config(drain_seed: u64) -> ExperimentConfig {
    let text = format!(
        r#"{{"horizon": 144, "drain_seed": {drain_seed}, "deviation": "one-hour", "solver": "nominal", "output_dir": "."}}"#
    );
    ExperimentConfig::from_json(&text).expect("static config parses")
}

/// Problem described by an experiment config given as JSON text. Relative
/// paths resolve against the working directory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_from_json(json: *const c_char, out: *mut *mut TclProblem) -> TclStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let mut cfg = lift(ExperimentConfig::from_json(text))?;
        cfg.resolve_paths(&PathBuf::from("."));
        let inner = lift(prepare(&cfg))?;
        out_handle(out, TclProblem { inner })
    })
}

/// # Safety
/// `problem` must come from a `tcl_problem_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_free(problem: *mut TclProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of states, actions and steps.
///
/// # Safety
/// `problem` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_dims(
    problem: *const TclProblem,
    n_states: *mut usize,
    n_actions: *mut usize,
    horizon: *mut usize,
) -> TclStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if n_states.is_null() || n_actions.is_null() || horizon.is_null() {
            return Err(null("output"));
        }
        *n_states = p.inner.problem.n_states();
        *n_actions = p.inner.problem.n_actions();
        *horizon = p.inner.problem.horizon();
        Ok(())
    })
}

/// Objective of the nominal policy.
///
/// # Safety
/// `problem` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_nominal_objective(problem: *const TclProblem, out: *mut f64) -> TclStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("output"))?;
        *out = p.inner.nominal_objective;
        Ok(())
    })
}

/// Copies the target `γ_1..γ_N` into `out`, which holds `len` values.
///
/// # Safety
/// `problem` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tcl_problem_target(problem: *const TclProblem, out: *mut f64, len: usize) -> TclStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("output"));
        }
        let gamma = p.inner.problem.target.values();
        if len != gamma.len() {
            set_error(format!("buffer holds {len} values, target has {}", gamma.len()));
            return Err(TclStatus::InvalidArgument);
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(gamma);
        Ok(())
    })
}

/// Runs `solver` for `iterations` steps with `τ_k = step_constant / √K`.
/// `init_delta = 0` starts from the uniform policy, otherwise from the
/// nominal rule deviated by `init_delta`. Writes the returned policy and its
/// objective.
///
/// # Safety
/// `problem` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tcl_solve(
    problem: *const TclProblem,
    solver: TclSolver,
    iterations: usize,
    step_constant: f64,
    init_delta: f64,
    out_policy: *mut *mut TclPolicy,
    out_objective: *mut f64,
) -> TclStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let objective = out_objective.as_mut().ok_or_else(|| null("objective output"))?;
        if out_policy.is_null() {
            return Err(null("policy output"));
        }
        let init = if init_delta == 0.0 { InitPolicy::Uniform } else { InitPolicy::NominalDeviation(init_delta) };
        let cfg = SolverConfig::new(iterations, StepSchedule::FixedHorizon(step_constant)).with_init(init);
        lift(cfg.validate())?;
        let prob = &p.inner.problem;
        let kind = match solver {
            TclSolver::MdMfc => SolverKind::MdMfc,
            TclSolver::FpMfg => SolverKind::FpMfg,
            TclSolver::OmdMfg => SolverKind::OmdMfg,
            TclSolver::FrankWolfe => SolverKind::FrankWolfe,
            TclSolver::Nominal => SolverKind::Nominal,
        };
        let policy = match kind {
            SolverKind::MdMfc => lift(md_mfc(prob, &cfg))?.policy,
            SolverKind::FpMfg => lift(fp_mfg(prob, &cfg))?.policy,
            SolverKind::OmdMfg => lift(omd_mfg(prob, &cfg))?.policy,
            SolverKind::FrankWolfe => lift(frank_wolfe(prob, &cfg))?.policy,
            SolverKind::Nominal => tcl_mfc::heater::nominal_policy(&p.inner.params.state_space(), prob.horizon()),
        };
        *objective = lift(prob.policy_cost(&policy))?;
        out_handle(out_policy, TclPolicy { inner: policy })
    })
}

/// # Safety
/// `policy` must come from [`tcl_solve`], or be null.
#[no_mangle]
pub unsafe extern "C" fn tcl_policy_free(policy: *mut TclPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// `π_n(a|x)` for `n` in `1..=N`.
///
/// # Safety
/// `policy` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcl_policy_prob(
    policy: *const TclPolicy,
    n: usize,
    x: usize,
    a: usize,
    out: *mut f64,
) -> TclStatus {
    guard(|| {
        let pi = &policy.as_ref().ok_or_else(|| null("policy"))?.inner;
        let out = out.as_mut().ok_or_else(|| null("output"))?;
        if n == 0 || n > pi.horizon() || x >= pi.n_states() || a >= pi.n_actions() {
            set_error(format!("index (n={n}, x={x}, a={a}) out of range"));
            return Err(TclStatus::InvalidArgument);
        }
        *out = pi.prob(n, x, a);
        Ok(())
    })
}

/// Simulates `fleet_size` heaters under `policy`. Writes the fraction of
/// heaters ON at `n = 0..=N` into `mean` (length `horizon + 1`) and the mean
/// daily switch count into `switches`.
///
/// # Safety
/// Handles must be live; `mean` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tcl_simulate(
    problem: *const TclProblem,
    policy: *const TclPolicy,
    fleet_size: usize,
    seed: u64,
    mean: *mut f64,
    len: usize,
    switches: *mut f64,
) -> TclStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        let pi = &policy.as_ref().ok_or_else(|| null("policy"))?.inner;
        let switches = switches.as_mut().ok_or_else(|| null("switches output"))?;
        if mean.is_null() {
            return Err(null("mean output"));
        }
        if len != p.problem.horizon() + 1 {
            set_error(format!("buffer holds {len} values, need {}", p.problem.horizon() + 1));
            return Err(TclStatus::InvalidArgument);
        }
        let trace = lift(simulate_population(fleet_size, pi, &p.params, &p.drain, &p.problem.mu0, seed))?;
        std::slice::from_raw_parts_mut(mean, len).copy_from_slice(&trace.mean_consumption);
        *switches = count_switches(&trace);
        Ok(())
    })
}

/// Runs a config file end to end, as `tcl-mfc run` does.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tcl_run_experiment(config_path: *const c_char) -> TclStatus {
    guard(|| {
        let path = str_arg(config_path, "config path")?;
        lift(run_experiment(path)).map(|_| ())
    })
}
