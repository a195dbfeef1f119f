use std::time::Instant;

use crate::error::Result;
use crate::mdp::PolicySequence;

use super::dp::{best_response, potential_reward};
use super::{elapsed_ms, MFCProblem, SolverConfig, SolverHistory, SolverOutput};

/// Fictitious play for the potential game.
///
/// `μ̄^k` is the uniform average of `μ^{π^0}, ..., μ^{π^k}`; each iteration
/// adds the best response to `μ̄^k`. The returned policy is the
/// marginal-weighted average `π̄_n(a|x) = Σ_k μ^{π^k}_n(x,a) / Σ_k ρ^{π^k}_n(x)`,
/// which induces `μ̄^K`. History entries are `F(μ̄^k)`.
pub fn fp_mfg(problem: &MFCProblem, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let (nx, na, horizon) = (problem.n_states(), problem.n_actions(), problem.horizon());
    let policy0 = cfg.initial_policy(problem)?;
    let mut history = SolverHistory::default();
    let mut mu_bar = problem.induced(&policy0)?;
    history.record(problem.cost(&mu_bar)?, elapsed_ms(start));
    if cfg.store_policies {
        history.policies.push(policy0);
    }
    for k in 0..cfg.iterations {
        let r = potential_reward(&mu_bar, &problem.target, &problem.phi);
        let (br, _) = best_response(&r, &problem.kernel)?;
        let mu_br = problem.induced(&br)?;
        // uniform average over the k + 2 distributions seen so far
        let w = 1.0 / (k + 2) as f64;
        mu_bar = mu_br.mix(&mu_bar, w);
        history.record(problem.cost(&mu_bar)?, elapsed_ms(start));
        if cfg.store_policies {
            history.policies.push(br);
        }
    }
    // Σ_k μ^{π^k}_n(x,a) / Σ_k ρ^{π^k}_n(x) is the same ratio on the average
    let mut policy = PolicySequence::uniform(nx, na, horizon);
    for n in 1..=horizon {
        let slice = mu_bar.slice(n);
        for x in 0..nx {
            let cells = &slice[x * na..(x + 1) * na];
            let rho: f64 = cells.iter().sum();
            if rho > 0.0 {
                for (dst, m) in policy.row_mut(n, x).iter_mut().zip(cells) {
                    *dst = m / rho;
                }
            }
        }
    }
    let objective = *history.objectives.last().expect("at least one entry");
    Ok(SolverOutput { policy, distribution: mu_bar, objective, iteration: cfg.iterations, history })
}
