use std::time::Instant;

use crate::error::{input_err, Result};

use super::dp::{potential_reward, regularized_backward_pass};
use super::{elapsed_ms, MFCProblem, SolverConfig, SolverHistory, SolverOutput};

/// Mirror descent for mean-field control.
///
/// Iterate `k` evaluates `μ^k = μ^{π^k}`, takes the potential reward
/// `r = −∇F(μ^k)` and replaces `π^k` by the closed-form solution of
/// `argmin_μ ⟨∇F(μ^k), μ⟩ + τ_k⁻¹ Γ(μ, μ^k)`. The returned policy is the
/// iterate with the smallest objective over `k = 0..=K`.
pub fn md_mfc(problem: &MFCProblem, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut policy = cfg.initial_policy(problem)?;
    if !policy.is_strictly_positive() {
        return input_err("mirror descent needs a strictly positive initial policy");
    }
    let k_max = cfg.iterations;
    let mut history = SolverHistory::default();
    let mut mu = problem.induced(&policy)?;
    let mut objective = problem.cost(&mu)?;
    history.record(objective, elapsed_ms(start));
    let mut best = (policy.clone(), mu.clone(), objective, 0);
    for k in 0..k_max {
        if cfg.store_policies {
            history.policies.push(policy.clone());
        }
        let r = potential_reward(&mu, &problem.target, &problem.phi);
        let tau = cfg.schedule.step(k, k_max);
        policy = regularized_backward_pass(&r, &problem.kernel, &policy, tau)?.0;
        mu = problem.induced(&policy)?;
        objective = problem.cost(&mu)?;
        history.record(objective, elapsed_ms(start));
        if objective < best.2 {
            best = (policy.clone(), mu.clone(), objective, k + 1);
        }
    }
    if cfg.store_policies {
        history.policies.push(policy);
    }
    let (policy, distribution, objective, iteration) = best;
    Ok(SolverOutput { policy, distribution, objective, iteration, history })
}
