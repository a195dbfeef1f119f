//! Backward passes shared by the solvers.

use crate::error::{config_err, input_err, Result};
use crate::mdp::{DistributionSequence, PolicySequence, TimedKernel};
use crate::objective::{consumption, grad_cost, ConsumptionObservable, TargetSignal};

use super::MFCProblem;

/// Relative tolerance under which two action values count as tied.
const TIE_TOL: f64 = 1e-12;

/// Per-step tables over `X × A` for `n = 1..=N`, laid out `x * |A| + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTable {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    values: Vec<f64>,
}

/// `r_n(x, a)`.
pub type RewardTable = StepTable;
/// `Q_n(x, a)`, plain or regularized.
pub type QTable = StepTable;

impl StepTable {
    pub fn zeros(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self { n_states, n_actions, horizon, values: vec![0.0; horizon * n_states * n_actions] }
    }

    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        mut f: F,
    ) -> Self {
        let mut t = Self::zeros(n_states, n_actions, horizon);
        for n in 1..=horizon {
            for x in 0..n_states {
                for a in 0..n_actions {
                    t.step_mut(n)[x * n_actions + a] = f(n, x, a);
                }
            }
        }
        t
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step(&self, n: usize) -> &[f64] {
        let w = self.n_states * self.n_actions;
        &self.values[(n - 1) * w..n * w]
    }

    pub fn step_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.n_states * self.n_actions;
        &mut self.values[(n - 1) * w..n * w]
    }

    pub fn get(&self, n: usize, x: usize, a: usize) -> f64 {
        self.step(n)[x * self.n_actions + a]
    }

    pub fn row(&self, n: usize, x: usize) -> &[f64] {
        let s = self.step(n);
        &s[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn check_shapes(r: &StepTable, kernel: &TimedKernel) -> Result<()> {
    if r.n_states != kernel.n_states() || r.n_actions != kernel.n_actions() || r.horizon != kernel.horizon() {
        return config_err(format!(
            "reward table is {}x{} over {} steps, kernel is {}x{} over {}",
            r.n_states,
            r.n_actions,
            r.horizon,
            kernel.n_states(),
            kernel.n_actions(),
            kernel.horizon()
        ));
    }
    Ok(())
}

/// `r_n(x, a) = −∇f_n(μ_n)(x, a) = −2 (μ_n(φ) − γ_n) φ(x)`.
pub fn potential_reward(mu: &DistributionSequence, target: &TargetSignal, phi: &ConsumptionObservable) -> RewardTable {
    let (nx, na, horizon) = (mu.n_states(), mu.n_actions(), mu.horizon());
    let mut r = StepTable::zeros(nx, na, horizon);
    for n in 1..=horizon {
        let g = grad_cost(mu.slice(n), target.at(n), phi);
        for (dst, v) in r.step_mut(n).iter_mut().zip(g) {
            *dst = -v;
        }
    }
    r
}

/// Q-function of a fixed policy:
/// `Q_n = r_n + Σ_{x'} p_{n+1}(x'|x,a) Σ_{a'} π_{n+1}(a'|x') Q_{n+1}(x',a')`.
pub fn plain_q_backward(r: &RewardTable, kernel: &TimedKernel, policy: &PolicySequence) -> Result<QTable> {
    check_shapes(r, kernel)?;
    let (nx, na, horizon) = (r.n_states, r.n_actions, r.horizon);
    let mut q = r.clone();
    let mut v = vec![0.0; nx];
    for n in (2..=horizon).rev() {
        for (x, vx) in v.iter_mut().enumerate() {
            *vx = policy.row(n, x).iter().zip(q.row(n, x)).map(|(p, qv)| p * qv).sum();
        }
        let prev = q.step_mut(n - 1);
        for x in 0..nx {
            for a in 0..na {
                prev[x * na + a] += kernel.expect(n, x, a, &v);
            }
        }
    }
    Ok(q)
}

/// Optimal Q-function by backward induction and its greedy policy. Tied
/// actions share the probability mass equally.
pub fn best_response(r: &RewardTable, kernel: &TimedKernel) -> Result<(PolicySequence, QTable)> {
    check_shapes(r, kernel)?;
    let (nx, na, horizon) = (r.n_states, r.n_actions, r.horizon);
    let mut q = r.clone();
    let mut policy = PolicySequence::uniform(nx, na, horizon);
    let mut v = vec![0.0; nx];
    for n in (1..=horizon).rev() {
        for (x, vx) in v.iter_mut().enumerate() {
            let row = q.row(n, x);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = TIE_TOL * best.abs().max(1.0);
            let ties = row.iter().filter(|&&qv| qv >= best - tol).count();
            for (dst, &qv) in policy.row_mut(n, x).iter_mut().zip(row) {
                *dst = if qv >= best - tol { 1.0 / ties as f64 } else { 0.0 };
            }
            *vx = best;
        }
        if n > 1 {
            let prev = q.step_mut(n - 1);
            for x in 0..nx {
                for a in 0..na {
                    prev[x * na + a] += kernel.expect(n, x, a, &v);
                }
            }
        }
    }
    Ok((policy, q))
}

/// `log Σ_a w_a exp(z_a)` with the maximum factored out.
fn log_weighted_sum_exp(weights: &[f64], z: &[f64]) -> f64 {
    let m = z
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(z, _)| *z)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().zip(weights).map(|(z, w)| w * (z - m).exp()).sum();
    m + s.ln()
}

/// One mirror-descent step in closed form.
///
/// Going backward from `Q̃_N = r_N`, each step sets
/// `π^{new}_n(a|x) ∝ π^{prev}_n(a|x) exp(τ Q̃_n(x,a))` and
/// `Q̃_{n−1}(x,a) = r_{n−1}(x,a) + Σ_{x'} p_n(x'|x,a) V_n(x')`, where
/// `V_n(x') = τ⁻¹ log Σ_{a'} π^{prev}_n(a'|x') exp(τ Q̃_n(x',a'))` is the value
/// of the per-state problem `max_π ⟨π, Q̃⟩ − τ⁻¹ KL(π, π^{prev})`.
pub fn regularized_backward_pass(
    r: &RewardTable,
    kernel: &TimedKernel,
    prev: &PolicySequence,
    tau: f64,
) -> Result<(PolicySequence, QTable)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return input_err(format!("step size must be positive, got {tau}"));
    }
    check_shapes(r, kernel)?;
    let (nx, na, horizon) = (r.n_states, r.n_actions, r.horizon);
    let mut q = r.clone();
    let mut policy = prev.clone();
    let mut v = vec![0.0; nx];
    let mut z = vec![0.0; na];
    for n in (1..=horizon).rev() {
        for (x, vx) in v.iter_mut().enumerate() {
            let weights = prev.row(n, x);
            for (za, qa) in z.iter_mut().zip(q.row(n, x)) {
                *za = tau * qa;
            }
            let lse = log_weighted_sum_exp(weights, &z);
            for ((dst, w), za) in policy.row_mut(n, x).iter_mut().zip(weights).zip(&z) {
                *dst = w * (za - lse).exp();
            }
            *vx = lse / tau;
        }
        if n > 1 {
            let prev_q = q.step_mut(n - 1);
            for x in 0..nx {
                for a in 0..na {
                    prev_q[x * na + a] += kernel.expect(n, x, a, &v);
                }
            }
        }
    }
    Ok((policy, q))
}

/// `J(π, μ) = Σ_{n=1}^N ⟨μ^π_n, r_n⟩`.
pub fn policy_value(r: &RewardTable, mu_pi: &DistributionSequence) -> f64 {
    (1..=r.horizon)
        .map(|n| r.step(n).iter().zip(mu_pi.slice(n)).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// `max_π J(π, μ)` from the best-response value function and `μ_0`.
pub fn best_response_value(r: &RewardTable, kernel: &TimedKernel, mu0: &[f64]) -> Result<f64> {
    let (policy, q) = best_response(r, kernel)?;
    let (nx, na) = (r.n_states, r.n_actions);
    let v: Vec<f64> = (0..nx)
        .map(|x| policy.row(1, x).iter().zip(q.row(1, x)).map(|(p, qv)| p * qv).sum())
        .collect();
    let mut total = 0.0;
    for x in 0..nx {
        for a in 0..na {
            let m = mu0[x * na + a];
            if m != 0.0 {
                total += m * kernel.expect(1, x, a, &v);
            }
        }
    }
    Ok(total)
}

/// Gain of a best response against the mean field induced by `policy`.
pub fn exploitability(problem: &MFCProblem, policy: &PolicySequence) -> Result<f64> {
    let mu = problem.induced(policy)?;
    let r = potential_reward(&mu, &problem.target, &problem.phi);
    Ok(best_response_value(&r, &problem.kernel, &problem.mu0)? - policy_value(&r, &mu))
}

/// `Σ_{x,a} [r(x,a,μ) − r(x,a,μ')] (μ − μ')(x,a)` for one step.
pub fn monotonicity_gap(mu: &[f64], mu_other: &[f64], gamma: f64, phi: &ConsumptionObservable) -> f64 {
    let g = grad_cost(mu, gamma, phi);
    let g_other = grad_cost(mu_other, gamma, phi);
    g.iter()
        .zip(&g_other)
        .zip(mu.iter().zip(mu_other))
        .map(|((a, b), (m, mo))| (-a + b) * (m - mo))
        .sum()
}

/// Closed form of [`monotonicity_gap`]: `−2 (μ(φ) − μ'(φ))²`.
pub fn monotonicity_gap_closed_form(mu: &[f64], mu_other: &[f64], phi: &ConsumptionObservable) -> f64 {
    let d = consumption(mu, phi) - consumption(mu_other, phi);
    -2.0 * d * d
}
