use std::time::Instant;

use crate::error::Result;
use crate::mdp::{policy_from_distribution, DistributionSequence, PolicySequence};

use super::dp::{best_response, potential_reward};
use super::{elapsed_ms, FrankWolfeStep, MFCProblem, SolverConfig, SolverHistory};

#[derive(Debug, Clone)]
pub struct FrankWolfeOutput {
    pub distribution: DistributionSequence,
    /// Policy recovered from the final distribution.
    pub policy: PolicySequence,
    pub objective: f64,
    pub history: SolverHistory,
}

/// Conditional gradient over the feasible distribution sequences.
///
/// The linear minimization oracle `argmin_μ ⟨μ, ∇F(μ̄^k)⟩` is a best response
/// to the reward `−∇F(μ̄^k)` followed by propagation. History entries are
/// `F(μ̄^k)`.
pub fn frank_wolfe(problem: &MFCProblem, cfg: &SolverConfig) -> Result<FrankWolfeOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut history = SolverHistory::default();
    let mut mu_bar = problem.induced(&cfg.initial_policy(problem)?)?;
    history.record(problem.cost(&mu_bar)?, elapsed_ms(start));
    for k in 0..cfg.iterations {
        let r = potential_reward(&mu_bar, &problem.target, &problem.phi);
        let (vertex_policy, _) = best_response(&r, &problem.kernel)?;
        let vertex = problem.induced(&vertex_policy)?;
        let eta = match cfg.frank_wolfe_step {
            FrankWolfeStep::Standard => 2.0 / (k + 3) as f64,
            FrankWolfeStep::Constant(eta) => eta,
        };
        mu_bar = vertex.mix(&mu_bar, eta);
        history.record(problem.cost(&mu_bar)?, elapsed_ms(start));
        if cfg.store_policies {
            history.policies.push(vertex_policy);
        }
    }
    let policy = policy_from_distribution(&mu_bar);
    let objective = *history.objectives.last().expect("at least one entry");
    Ok(FrankWolfeOutput { distribution: mu_bar, policy, objective, history })
}
