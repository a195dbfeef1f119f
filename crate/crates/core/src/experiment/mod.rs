//! Config-driven experiment pipeline: build the kernel, the target, solve,
//! simulate the fleet and export CSV artifacts.

mod config;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{
    build_deviation, load_deviation, DeviationKind, ExperimentConfig, InitKind, ScheduleKind, SolverBlock,
};

use crate::error::{Error, Result};
use crate::heater::{
    build_kernel, load_drain_profile, nominal_initial_distribution, nominal_policy, synth_drain_profile,
    DrainProfile, HeaterParams, SynthDrainConfig,
};
use crate::mdp::{propagate, PolicySequence, StateSpace};
use crate::objective::{build_target, consumption, consumption_profile, ConsumptionObservable, DeviationSignal};
use crate::popsim::{count_switches, simulate_population, write_trace_csv, FleetTrace};
use crate::solvers::{fp_mfg, frank_wolfe, md_mfc, omd_mfg, MFCProblem, SolverHistory, SolverKind};

/// Files written by [`run_experiment`].
pub const ARTIFACTS: [&str; 6] = [
    "kernel_check.txt",
    "target.csv",
    "history.csv",
    "trace.csv",
    "policy.csv",
    "summary.txt",
];

/// Headline numbers of a run, as written to `summary.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub solver: SolverKind,
    /// `F(μ^π)` of the exported policy, recomputed by propagation.
    pub objective: f64,
    pub nominal_objective: f64,
    /// Iterate the exported policy comes from.
    pub iteration: usize,
    /// Mean over `n = 1..N` of `(m̄_n − γ_n)²` for the simulated fleet.
    pub tracking_mse: f64,
    /// Same for the nominal mean-field consumption.
    pub nominal_mse: f64,
    /// `None` when the fleet is replaced by the mean-field flow.
    pub mean_daily_switches: Option<f64>,
    pub clamped_target_steps: usize,
    pub output_dir: PathBuf,
}

fn check(cfg: &ExperimentConfig) -> Result<usize> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    Ok(cfg.steps_per_day().expect("validated"))
}

/// Runs the pipeline of a config file.
pub fn run_experiment(path: impl AsRef<Path>) -> Result<RunSummary> {
    run_config(&ExperimentConfig::load(path)?)
}

/// Everything a run needs before the solver starts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: HeaterParams,
    pub drain: DrainProfile,
    pub problem: MFCProblem,
    /// Nominal mean-field consumption for `n = 1..N`.
    pub baseline: Vec<f64>,
    pub deviation: DeviationSignal,
    pub clamped_target_steps: usize,
    pub nominal_objective: f64,
}

/// Validates `cfg` and builds the drain, kernel, `μ_0` and target.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let steps_per_day = check(cfg)?;
    let params = cfg.heater_params()?;
    let space = params.state_space();
    let n = cfg.horizon;

    let drain = match (&cfg.drain_file, cfg.drain_seed) {
        (Some(path), _) => load_drain_profile(path)?,
        (None, Some(seed)) => {
            let synth = SynthDrainConfig { steps_per_day, ..SynthDrainConfig::default() };
            synth_drain_profile(seed, n, &synth)?
        }
        (None, None) => unreachable!("validated"),
    };
    let kernel = build_kernel(&params, &drain)?;
    kernel.validate()?;
    let mu0 = nominal_initial_distribution(&params, &kernel, cfg.warmup_days)?;
    let phi = ConsumptionObservable::heater(&space);

    let baseline = consumption_profile(&propagate(&mu0, &nominal_policy(&space, n), &kernel)?, &phi);
    let deviation = build_deviation(cfg, steps_per_day)?;
    let (target, clamped_target_steps) = build_target(&baseline, &deviation)?;
    let problem = MFCProblem::new(kernel, mu0, target, phi)?;
    let nominal_objective = problem.policy_cost(&nominal_policy(&space, n))?;
    Ok(Prepared { params, drain, problem, baseline, deviation, clamped_target_steps, nominal_objective })
}

/// Runs the pipeline of an already-resolved config.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let Prepared { params, drain, problem, baseline, deviation, clamped_target_steps: clamped, nominal_objective } =
        prepare(cfg)?;
    let space = params.state_space();
    let n = cfg.horizon;
    let nominal = nominal_policy(&space, n);

    let solver_cfg = cfg.solver_config();
    solver_cfg.validate()?;
    let (policy, history, iteration) = match cfg.solver {
        SolverKind::MdMfc => {
            let o = md_mfc(&problem, &solver_cfg)?;
            (o.policy, o.history, o.iteration)
        }
        SolverKind::FpMfg => {
            let o = fp_mfg(&problem, &solver_cfg)?;
            (o.policy, o.history, o.iteration)
        }
        SolverKind::OmdMfg => {
            let o = omd_mfg(&problem, &solver_cfg)?;
            (o.policy, o.history, o.iteration)
        }
        SolverKind::FrankWolfe => {
            let o = frank_wolfe(&problem, &solver_cfg)?;
            let k = o.history.len().saturating_sub(1);
            (o.policy, o.history, k)
        }
        SolverKind::Nominal => {
            let mut h = SolverHistory::default();
            h.record(nominal_objective, 0.0);
            (nominal.clone(), h, 0)
        }
    };
    let mu = problem.induced(&policy)?;
    let objective = problem.cost(&mu)?;
    if !objective.is_finite() {
        return Err(Error::Input(format!("{} produced a non-finite objective", cfg.solver.name())));
    }

    let trace = if cfg.fleet_size == 0 {
        let mean = (0..=n).map(|k| consumption(mu.slice(k), &problem.phi)).collect();
        (mean, None)
    } else {
        let fleet = simulate_population(cfg.fleet_size, &policy, &params, &drain, &problem.mu0, cfg.sim_seed)?;
        (fleet.mean_consumption.clone(), Some(fleet))
    };
    let gamma = problem.target.values();
    let tracking_mse = mse(&trace.0[1..], gamma);
    let nominal_mse = mse(&baseline, gamma);

    std::fs::create_dir_all(&cfg.output_dir)?;
    let out = |name: &str| cfg.output_dir.join(name);
    write_kernel_check(&out("kernel_check.txt"), &problem)?;
    write_target(&out("target.csv"), &baseline, deviation.values(), gamma)?;
    history.save_csv(out("history.csv"), cfg.record_timing)?;
    match &trace.1 {
        Some(fleet) => write_trace_csv(out("trace.csv"), fleet, gamma, &baseline)?,
        None => write_mean_field_trace(&out("trace.csv"), &trace.0, gamma, &baseline)?,
    }
    write_policy(&out("policy.csv"), &policy, &space)?;

    let summary = RunSummary {
        solver: cfg.solver,
        objective,
        nominal_objective,
        iteration,
        tracking_mse,
        nominal_mse,
        mean_daily_switches: trace.1.as_ref().map(count_switches),
        clamped_target_steps: clamped,
        output_dir: cfg.output_dir.clone(),
    };
    write_summary(&out("summary.txt"), &summary, &trace.1)?;
    Ok(summary)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_kernel_check(path: &Path, problem: &MFCProblem) -> Result<()> {
    let k = &problem.kernel;
    let mut f = create(path)?;
    writeln!(f, "states={}", k.n_states())?;
    writeln!(f, "actions={}", k.n_actions())?;
    writeln!(f, "horizon={}", k.horizon())?;
    writeln!(f, "nonzeros={}", k.entries().count())?;
    writeln!(f, "max_successors={}", k.max_support())?;
    writeln!(f, "max_row_sum_error={:e}", k.max_row_error())?;
    f.flush()?;
    Ok(())
}

fn write_target(path: &Path, baseline: &[f64], deviation: &[f64], target: &[f64]) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "step,baseline,deviation,target")?;
    for n in 0..target.len() {
        writeln!(f, "{},{},{},{}", n + 1, baseline[n], deviation[n], target[n])?;
    }
    f.flush()?;
    Ok(())
}

fn write_mean_field_trace(path: &Path, mean: &[f64], target: &[f64], nominal: &[f64]) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "step,mean_consumption,target,nominal_consumption")?;
    for n in 1..mean.len() {
        writeln!(f, "{n},{},{},{}", mean[n], target[n - 1], nominal[n - 1])?;
    }
    f.flush()?;
    Ok(())
}

/// `n,x,mode,temp,p_on`: probability of the ON action per step and state.
fn write_policy(path: &Path, policy: &PolicySequence, space: &StateSpace) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "n,x,mode,temp,p_on")?;
    for n in 1..=policy.horizon() {
        for (x, mode, temp) in space.iter() {
            writeln!(f, "{n},{x},{mode},{temp},{}", policy.prob(n, x, 1))?;
        }
    }
    f.flush()?;
    Ok(())
}

fn write_summary(path: &Path, s: &RunSummary, fleet: &Option<FleetTrace>) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "solver={}", s.solver.name());
    let _ = writeln!(text, "iteration={}", s.iteration);
    let _ = writeln!(text, "objective={:e}", s.objective);
    let _ = writeln!(text, "nominal_objective={:e}", s.nominal_objective);
    let _ = writeln!(text, "tracking_mse={:e}", s.tracking_mse);
    let _ = writeln!(text, "nominal_mse={:e}", s.nominal_mse);
    match (s.mean_daily_switches, fleet) {
        (Some(sw), Some(f)) => {
            let _ = writeln!(text, "fleet_size={}", f.fleet_size());
            let _ = writeln!(text, "mean_daily_switches={sw}");
        }
        _ => {
            let _ = writeln!(text, "fleet_size=0");
            let _ = writeln!(text, "mean_daily_switches=n/a");
        }
    }
    let _ = writeln!(text, "clamped_target_steps={}", s.clamped_target_steps);
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads back the `key=value` lines of a `summary.txt`.
pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}
