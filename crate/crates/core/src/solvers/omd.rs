use std::time::Instant;

use crate::error::{input_err, Result};

use super::dp::{plain_q_backward, potential_reward};
use super::{elapsed_ms, MFCProblem, SolverConfig, SolverHistory, SolverOutput};

/// Online mirror descent for the potential game.
///
/// Each iterate evaluates the plain Q-function of `π^k` against its own mean
/// field and applies the multiplicative-weights step
/// `π^{k+1}_n(a|x) ∝ π^k_n(a|x) exp(τ_k Q^k_n(x,a))` at every step at once.
/// Returns the last iterate.
pub fn omd_mfg(problem: &MFCProblem, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut policy = cfg.initial_policy(problem)?;
    if !policy.is_strictly_positive() {
        return input_err("online mirror descent needs a strictly positive initial policy");
    }
    let (nx, horizon) = (problem.n_states(), problem.horizon());
    let k_max = cfg.iterations;
    let mut history = SolverHistory::default();
    let mut mu = problem.induced(&policy)?;
    history.record(problem.cost(&mu)?, elapsed_ms(start));
    for k in 0..k_max {
        if cfg.store_policies {
            history.policies.push(policy.clone());
        }
        let r = potential_reward(&mu, &problem.target, &problem.phi);
        let q = plain_q_backward(&r, &problem.kernel, &policy)?;
        let tau = cfg.schedule.step(k, k_max);
        for n in 1..=horizon {
            for x in 0..nx {
                let qrow = q.row(n, x);
                let m = qrow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let row = policy.row_mut(n, x);
                let mut total = 0.0;
                for (p, qa) in row.iter_mut().zip(qrow) {
                    *p *= (tau * (qa - m)).exp();
                    total += *p;
                }
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
        mu = problem.induced(&policy)?;
        history.record(problem.cost(&mu)?, elapsed_ms(start));
    }
    if cfg.store_policies {
        history.policies.push(policy.clone());
    }
    let objective = *history.objectives.last().expect("at least one entry");
    Ok(SolverOutput { policy, distribution: mu, objective, iteration: k_max, history })
}
