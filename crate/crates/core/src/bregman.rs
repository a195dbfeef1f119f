//! KL divergence and the policy-space Bregman divergence Γ.
//!
//! Γ is defined on policy sequences through the distribution they induce:
//!
//! ```text
//! Γ(μ^π, μ^π') = Σ_{n=1}^N E_{(x,a)~μ_n}[ log π_n(a|x) / π'_n(a|x) ]
//!             = Σ_n KL(μ_n, μ'_n) − Σ_n KL(ρ_n, ρ'_n)
//! ```
//!
//! and is the Bregman divergence generated by
//! `ψ(μ) = Σ_n φ(μ_n) − Σ_n φ(ρ_n)` with `φ` the neg-entropy. Everything is in
//! nats; `0 · log 0 = 0`.

use std::fmt;
use std::ops::Add;

use crate::error::{config_err, input_err, Result};
use crate::mdp::{marginal, DistributionSequence, PolicySequence};

/// A divergence value, with absolute-continuity failures kept distinct from
/// large finite values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    /// Value as `f64`, with `+∞` for the infinite case.
    pub fn value(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Add for Divergence {
    type Output = Divergence;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Divergence::Finite(a), Divergence::Finite(b)) => Divergence::Finite(a + b),
            _ => Divergence::Infinite,
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{v}"),
            Divergence::Infinite => write!(f, "inf"),
        }
    }
}

/// Total divergence plus its per-step contributions (`n = 1..=N`).
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub value: Divergence,
    pub per_step: Vec<Divergence>,
}

impl DivergenceReport {
    fn from_steps(per_step: Vec<Divergence>) -> Self {
        let value = per_step.iter().copied().fold(Divergence::Finite(0.0), |a, b| a + b);
        Self { value, per_step }
    }
}

/// `KL(η, ν) = Σ η log(η/ν)`.
pub fn kl(eta: &[f64], nu: &[f64]) -> Result<Divergence> {
    if eta.len() != nu.len() {
        return input_err(format!("KL between supports of size {} and {}", eta.len(), nu.len()));
    }
    let mut acc = 0.0;
    for (&e, &v) in eta.iter().zip(nu) {
        if e == 0.0 {
            continue;
        }
        if v == 0.0 {
            return Ok(Divergence::Infinite);
        }
        acc += e * (e / v).ln();
    }
    Ok(Divergence::Finite(acc))
}

fn same_shape(mu: &DistributionSequence, nx: usize, na: usize, horizon: usize) -> Result<()> {
    if mu.n_states() != nx || mu.n_actions() != na || mu.horizon() != horizon {
        return config_err(format!(
            "shape mismatch: distribution is {}x{} over {} steps, expected {nx}x{na} over {horizon}",
            mu.n_states(),
            mu.n_actions(),
            mu.horizon()
        ));
    }
    Ok(())
}

/// Γ in policy form. `mu` must be the distribution induced by `pi`.
pub fn gamma_policy_form(
    mu: &DistributionSequence,
    pi: &PolicySequence,
    pi_ref: &PolicySequence,
) -> Result<DivergenceReport> {
    let (nx, na, horizon) = (pi.n_states(), pi.n_actions(), pi.horizon());
    same_shape(mu, nx, na, horizon)?;
    if pi_ref.n_states() != nx || pi_ref.n_actions() != na || pi_ref.horizon() != horizon {
        return config_err("reference policy shape differs");
    }
    let mut per_step = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let slice = mu.slice(n);
        let mut acc = 0.0;
        let mut infinite = false;
        'states: for x in 0..nx {
            let (row, row_ref) = (pi.row(n, x), pi_ref.row(n, x));
            for a in 0..na {
                let m = slice[x * na + a];
                if m == 0.0 {
                    continue;
                }
                if row_ref[a] == 0.0 {
                    infinite = true;
                    break 'states;
                }
                acc += m * (row[a] / row_ref[a]).ln();
            }
        }
        per_step.push(if infinite { Divergence::Infinite } else { Divergence::Finite(acc) });
    }
    Ok(DivergenceReport::from_steps(per_step))
}

/// Γ in marginal form: `Σ_n KL(μ_n, μ'_n) − Σ_n KL(ρ_n, ρ'_n)`.
pub fn gamma_marginal_form(mu: &DistributionSequence, mu_ref: &DistributionSequence) -> Result<Divergence> {
    same_shape(mu_ref, mu.n_states(), mu.n_actions(), mu.horizon())?;
    let na = mu.n_actions();
    let mut total = 0.0;
    for n in 1..=mu.horizon() {
        let joint = kl(mu.slice(n), mu_ref.slice(n))?;
        let Some(joint) = joint.finite() else {
            return Ok(Divergence::Infinite);
        };
        let states = kl(&marginal(mu.slice(n), na), &marginal(mu_ref.slice(n), na))?;
        // finite joint KL implies finite marginal KL
        total += joint - states.value();
    }
    Ok(Divergence::Finite(total))
}

/// Negative conditional entropy of the action given the state, summed over
/// `n = 1..=N`.
pub fn psi(mu: &DistributionSequence) -> f64 {
    psi_per_step(mu).iter().sum()
}

/// Per-step contributions of [`psi`].
pub fn psi_per_step(mu: &DistributionSequence) -> Vec<f64> {
    let na = mu.n_actions();
    (1..=mu.horizon())
        .map(|n| {
            let slice = mu.slice(n);
            let mut acc = 0.0;
            for row in slice.chunks(na) {
                let rho: f64 = row.iter().sum();
                for &m in row {
                    if m > 0.0 {
                        acc += m * (m / rho).ln();
                    }
                }
            }
            acc
        })
        .collect()
}

/// `∇ψ(μ)(n, x, a) = log(μ_n(x,a) / ρ_n(x))`, one table per `n = 1..=N`.
/// Cells with zero mass map to `−∞`.
pub fn psi_gradient(mu: &DistributionSequence) -> Vec<Vec<f64>> {
    let na = mu.n_actions();
    (1..=mu.horizon())
        .map(|n| {
            let slice = mu.slice(n);
            let mut g = Vec::with_capacity(slice.len());
            for row in slice.chunks(na) {
                let rho: f64 = row.iter().sum();
                g.extend(row.iter().map(|&m| if m > 0.0 { (m / rho).ln() } else { f64::NEG_INFINITY }));
            }
            g
        })
        .collect()
}

/// `⟨g, μ⟩ = Σ_{n ≥ 1} Σ_{x,a} g_n(x,a) μ_n(x,a)` for tables returned by
/// [`psi_gradient`].
pub fn pair(grad: &[Vec<f64>], mu: &DistributionSequence) -> f64 {
    grad.iter()
        .enumerate()
        .map(|(i, g)| g.iter().zip(mu.slice(i + 1)).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}
