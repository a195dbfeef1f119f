//! Iterative solvers for the tracking problem `min_π F(μ^π)`.
//!
//! * [`md_mfc`]: mirror descent on state-action distributions with the
//!   policy-space divergence Γ; each step is a softmax backward pass.
//! * [`fp_mfg`]: fictitious play on the associated potential game.
//! * [`omd_mfg`]: online mirror descent on the game, multiplicative weights on
//!   the plain Q-function.
//! * [`frank_wolfe`]: conditional gradient over the occupation-measure polytope.
//!
//! All four share the potential reward `r_n(x, a) = −∇f_n(μ_n)(x, a)` and the
//! backward passes in [`dp`].

pub mod dp;
mod fp;
mod fw;
mod md;
mod omd;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dp::{
    best_response, best_response_value, exploitability, monotonicity_gap, monotonicity_gap_closed_form, plain_q_backward, policy_value,
    potential_reward, regularized_backward_pass, QTable, RewardTable, StepTable,
};
pub use fp::fp_mfg;
pub use fw::{frank_wolfe, FrankWolfeOutput};
pub use md::md_mfc;
pub use omd::omd_mfg;

use crate::error::{config_err, input_err, Result};
use crate::mdp::{check_distribution, propagate, DistributionSequence, PolicySequence, TimedKernel};
use crate::objective::{eval_cost, lipschitz_bound, ConsumptionObservable, TargetSignal};

/// Kernel, initial distribution, observable and target of one tracking problem.
#[derive(Debug, Clone)]
pub struct MFCProblem {
    pub kernel: TimedKernel,
    pub mu0: Vec<f64>,
    pub target: TargetSignal,
    pub phi: ConsumptionObservable,
}

impl MFCProblem {
    pub fn new(kernel: TimedKernel, mu0: Vec<f64>, target: TargetSignal, phi: ConsumptionObservable) -> Result<Self> {
        if mu0.len() != kernel.n_states() * kernel.n_actions() {
            return config_err(format!(
                "μ_0 has {} cells, kernel expects {}",
                mu0.len(),
                kernel.n_states() * kernel.n_actions()
            ));
        }
        check_distribution(&mu0, "μ_0")?;
        if target.len() != kernel.horizon() {
            return config_err(format!("target has {} steps, kernel has {}", target.len(), kernel.horizon()));
        }
        if phi.values().len() != kernel.n_states() {
            return config_err("observable size differs from |X|");
        }
        Ok(Self { kernel, mu0, target, phi })
    }

    pub fn horizon(&self) -> usize {
        self.kernel.horizon()
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.n_actions()
    }

    pub fn induced(&self, policy: &PolicySequence) -> Result<DistributionSequence> {
        propagate(&self.mu0, policy, &self.kernel)
    }

    pub fn cost(&self, mu: &DistributionSequence) -> Result<f64> {
        eval_cost(mu, &self.target, &self.phi)
    }

    /// `F(μ^π)`.
    pub fn policy_cost(&self, policy: &PolicySequence) -> Result<f64> {
        self.cost(&self.induced(policy)?)
    }
}

/// Step size `τ_k` as a function of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `τ_k = c`.
    Constant(f64),
    /// `τ_k = c / √K` for a run of `K` iterations.
    FixedHorizon(f64),
    /// `τ_k = c / √(k + 1)`.
    Harmonic(f64),
}

impl StepSchedule {
    /// `c / √K` with `c = 1 / L`.
    pub fn default_for(horizon: usize) -> Self {
        StepSchedule::FixedHorizon(1.0 / lipschitz_bound(horizon))
    }

    pub fn constant(&self) -> f64 {
        match *self {
            StepSchedule::Constant(c) | StepSchedule::FixedHorizon(c) | StepSchedule::Harmonic(c) => c,
        }
    }

    /// `τ_k` for iteration `k` of `iterations`.
    pub fn step(&self, k: usize, iterations: usize) -> f64 {
        match *self {
            StepSchedule::Constant(c) => c,
            StepSchedule::FixedHorizon(c) => c / (iterations.max(1) as f64).sqrt(),
            StepSchedule::Harmonic(c) => c / ((k + 1) as f64).sqrt(),
        }
    }
}

/// Starting policy of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    Uniform,
    /// Keep the current mode with probability `1 − δ`. The mode of a state is
    /// read from the observable, `m = φ(x)`, which holds for the heater model.
    NominalDeviation(f64),
    Given(PolicySequence),
}

/// Mixing weights of the Frank-Wolfe update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FrankWolfeStep {
    /// `η_{k+1} = 2 / (k + 3)`.
    #[default]
    Standard,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub init: InitPolicy,
    pub frank_wolfe_step: FrankWolfeStep,
    /// Keep every iterate's policy in the history.
    pub store_policies: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(iterations: usize, schedule: StepSchedule) -> Self {
        Self {
            iterations,
            schedule,
            init: InitPolicy::Uniform,
            frank_wolfe_step: FrankWolfeStep::Standard,
            store_policies: false,
            seed: 0,
        }
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.schedule.constant();
        if !(c > 0.0 && c.is_finite()) {
            return input_err(format!("step constant must be positive, got {c}"));
        }
        if let InitPolicy::NominalDeviation(d) = self.init {
            if !(0.0..=0.5).contains(&d) {
                return input_err(format!("nominal deviation {d} outside [0, 0.5]"));
            }
        }
        if let FrankWolfeStep::Constant(eta) = self.frank_wolfe_step {
            if !(eta > 0.0 && eta <= 1.0) {
                return input_err(format!("Frank-Wolfe step {eta} outside (0, 1]"));
            }
        }
        Ok(())
    }

    pub(crate) fn initial_policy(&self, problem: &MFCProblem) -> Result<PolicySequence> {
        let (nx, na, horizon) = (problem.n_states(), problem.n_actions(), problem.horizon());
        match &self.init {
            InitPolicy::Uniform => Ok(PolicySequence::uniform(nx, na, horizon)),
            InitPolicy::NominalDeviation(delta) => {
                if na != 2 {
                    return config_err("nominal-deviation initialization needs two actions");
                }
                let phi = problem.phi.values().to_vec();
                PolicySequence::from_fn(nx, na, horizon, |_, x| {
                    if phi[x] > 0.5 {
                        vec![*delta, 1.0 - delta]
                    } else {
                        vec![1.0 - delta, *delta]
                    }
                })
            }
            InitPolicy::Given(p) => {
                if p.n_states() != nx || p.n_actions() != na || p.horizon() != horizon {
                    return config_err("initial policy shape differs from the problem");
                }
                Ok(p.clone())
            }
        }
    }
}

/// Per-iteration record of a solver run. Entry `k` belongs to iterate `k`,
/// `k = 0..=K`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverHistory {
    pub objectives: Vec<f64>,
    pub running_min: Vec<f64>,
    /// Milliseconds since the start of the run when the entry was recorded.
    pub wall_ms: Vec<f64>,
    pub policies: Vec<PolicySequence>,
}

impl SolverHistory {
    pub(crate) fn record(&mut self, objective: f64, elapsed_ms: f64) {
        let best = self.running_min.last().map_or(objective, |m| m.min(objective));
        self.objectives.push(objective);
        self.running_min.push(best);
        self.wall_ms.push(elapsed_ms);
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// Index and value of the smallest objective.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.objectives
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (k, v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((k, v)),
            })
    }

    /// Writes `iter,objective,running_min,wall_ms`. With `timing = false`
    /// the timing column is zero so the file depends only on the inputs.
    pub fn write_csv(&self, mut out: impl Write, timing: bool) -> Result<()> {
        writeln!(out, "iter,objective,running_min,wall_ms")?;
        for k in 0..self.objectives.len() {
            let ms = if timing { self.wall_ms[k] } else { 0.0 };
            writeln!(out, "{k},{:e},{:e},{ms:.3}", self.objectives[k], self.running_min[k])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, timing: bool) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), timing)
    }
}

/// Result of a policy-producing solver.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub policy: PolicySequence,
    pub distribution: DistributionSequence,
    pub objective: f64,
    /// Iterate the returned policy comes from.
    pub iteration: usize,
    pub history: SolverHistory,
}

/// Solver selected by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    MdMfc,
    FpMfg,
    OmdMfg,
    FrankWolfe,
    Nominal,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::MdMfc => "md-mfc",
            SolverKind::FpMfg => "fp-mfg",
            SolverKind::OmdMfg => "omd-mfg",
            SolverKind::FrankWolfe => "frank-wolfe",
            SolverKind::Nominal => "nominal",
        }
    }
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::Constant(0.3).step(7, 100), 0.3);
        assert!((StepSchedule::FixedHorizon(2.0).step(3, 100) - 0.2).abs() < 1e-15);
        assert!((StepSchedule::Harmonic(2.0).step(3, 100) - 1.0).abs() < 1e-15);
        assert!((StepSchedule::default_for(144).constant() - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn running_min_is_monotone() {
        let mut h = SolverHistory::default();
        for v in [3.0, 1.0, 2.0, 0.5, 0.7] {
            h.record(v, 0.0);
        }
        assert_eq!(h.running_min, vec![3.0, 1.0, 1.0, 0.5, 0.5]);
        assert_eq!(h.best(), Some((3, 0.5)));
        let mut buf = Vec::new();
        h.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective,running_min,wall_ms\n0,3e0,3e0,0.000\n"));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(10, StepSchedule::Constant(0.0)).validate().is_err());
        let c = SolverConfig::new(10, StepSchedule::Constant(1.0)).with_init(InitPolicy::NominalDeviation(0.7));
        assert!(c.validate().is_err());
    }
}
