//! Target-tracking cost `F(μ) = Σ_{n=1}^N (μ_n(φ) − γ_n)²` and the signals it
//! tracks. Power is normalized so that a fully-ON fleet consumes 1.

use crate::error::{config_err, input_err, Result};
use crate::mdp::{DistributionSequence, StateSpace};

/// Per-state consumption `φ(x)`; for heaters `φ((m, θ)) = m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionObservable(Vec<f64>);

impl ConsumptionObservable {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn heater(space: &StateSpace) -> Self {
        Self(space.iter().map(|(_, m, _)| m as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Target `γ_n ∈ [0, 1]` for `n = 1..=N` (stored at index `n - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSignal(Vec<f64>);

impl TargetSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return input_err(format!("target entry {i} = {v} outside [0,1]"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `γ_n` for `n = 1..=N`.
    pub fn at(&self, n: usize) -> f64 {
        self.0[n - 1]
    }
}

/// Zero-energy deviation `λ_n` added on top of a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSignal(Vec<f64>);

impl DeviationSignal {
    /// Checks the zero-energy condition `|Σ λ| ≤ 1e-9`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let energy: f64 = values.iter().sum();
        if energy.abs() > 1e-9 {
            return input_err(format!("deviation has nonzero energy {energy:e}"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `μ_n(φ) = Σ_{x,a} φ(x) μ_n(x,a)`.
pub fn consumption(joint: &[f64], phi: &ConsumptionObservable) -> f64 {
    let na = joint.len() / phi.0.len();
    joint.chunks(na).zip(&phi.0).map(|(row, f)| f * row.iter().sum::<f64>()).sum()
}

/// Consumption profile `(μ_n(φ))_{n=1..N}`.
pub fn consumption_profile(mu: &DistributionSequence, phi: &ConsumptionObservable) -> Vec<f64> {
    (1..=mu.horizon()).map(|n| consumption(mu.slice(n), phi)).collect()
}

/// `F(μ) = Σ_{n=1}^N (μ_n(φ) − γ_n)²`.
pub fn eval_cost(mu: &DistributionSequence, target: &TargetSignal, phi: &ConsumptionObservable) -> Result<f64> {
    if target.len() != mu.horizon() {
        return input_err(format!("target has {} steps, distribution has {}", target.len(), mu.horizon()));
    }
    if phi.0.len() != mu.n_states() {
        return config_err("observable and distribution disagree on |X|");
    }
    Ok((1..=mu.horizon())
        .map(|n| {
            let d = consumption(mu.slice(n), phi) - target.at(n);
            d * d
        })
        .sum())
}

/// `∇f_n(μ_n)(x, a) = 2 (μ_n(φ) − γ_n) φ(x)`, laid out `x * |A| + a`.
pub fn grad_cost(joint: &[f64], gamma: f64, phi: &ConsumptionObservable) -> Vec<f64> {
    let na = joint.len() / phi.0.len();
    let scale = 2.0 * (consumption(joint, phi) - gamma);
    phi.0.iter().flat_map(|f| std::iter::repeat_n(scale * f, na)).collect()
}

/// Lipschitz constant of `F` w.r.t. `Σ_n ‖·‖₁`: `L = (Σ l_n²)^{1/2}` with
/// `l_n = 2 ‖φ‖∞² = 2`.
pub fn lipschitz_bound(horizon: usize) -> f64 {
    2.0 * (horizon as f64).sqrt()
}

/// Zero before `start_step`, `+amplitude` for `up_steps`, and a constant
/// negative tail over the remaining steps that cancels the energy.
pub fn step_deviation(start_step: usize, up_steps: usize, amplitude: f64, horizon: usize) -> Result<DeviationSignal> {
    if start_step + up_steps > horizon {
        return input_err(format!("step [{start_step}, {}) exceeds horizon {horizon}", start_step + up_steps));
    }
    window_deviation(start_step, start_step, up_steps, amplitude, horizon)
}

/// Zero before `quiet_steps`, `+amplitude` on `[up_start, up_start + up_steps)`
/// and a constant negative value on the rest that cancels the energy.
pub fn window_deviation(
    quiet_steps: usize,
    up_start: usize,
    up_steps: usize,
    amplitude: f64,
    horizon: usize,
) -> Result<DeviationSignal> {
    if up_start < quiet_steps || up_start + up_steps > horizon {
        return input_err(format!(
            "window [{up_start}, {}) outside [{quiet_steps}, {horizon})",
            up_start + up_steps
        ));
    }
    if amplitude < 0.0 {
        return input_err(format!("negative amplitude {amplitude}"));
    }
    let rest = horizon - quiet_steps - up_steps;
    if rest == 0 {
        return input_err("no steps left to balance the deviation energy");
    }
    let low = -amplitude * up_steps as f64 / rest as f64;
    let mut v = vec![0.0; horizon];
    v[quiet_steps..].fill(low);
    v[up_start..up_start + up_steps].fill(amplitude);
    DeviationSignal::new(v)
}

/// `γ = b + λ`, clamped to `[0, 1]`. Returns the target and the number of
/// clamped entries.
pub fn build_target(baseline: &[f64], deviation: &DeviationSignal) -> Result<(TargetSignal, usize)> {
    if baseline.len() != deviation.len() {
        return input_err(format!(
            "baseline has {} steps, deviation has {}",
            baseline.len(),
            deviation.len()
        ));
    }
    let mut clamped = 0;
    let values = baseline
        .iter()
        .zip(deviation.values())
        .map(|(b, l)| {
            let g = b + l;
            if !(0.0..=1.0).contains(&g) {
                clamped += 1;
            }
            g.clamp(0.0, 1.0)
        })
        .collect();
    Ok((TargetSignal(values), clamped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi2() -> ConsumptionObservable {
        ConsumptionObservable::new(vec![0.0, 1.0])
    }

    #[test]
    fn consumption_examples() {
        let phi = phi2();
        assert_eq!(consumption(&[0.3, 0.7, 0.0, 0.0], &phi), 0.0);
        assert_eq!(consumption(&[0.0, 0.0, 0.4, 0.6], &phi), 1.0);
        assert_eq!(consumption(&[0.25; 4], &phi), 0.5);
    }

    #[test]
    fn eval_cost_examples() {
        let phi = phi2();
        let mu = DistributionSequence::from_slices(2, 2, vec![vec![0.25; 4]; 3]).unwrap();
        let c = eval_cost(&mu, &TargetSignal::new(vec![0.4, 0.7]).unwrap(), &phi).unwrap();
        assert!((c - 0.05).abs() < 1e-15);
        assert_eq!(eval_cost(&mu, &TargetSignal::new(vec![0.5, 0.5]).unwrap(), &phi).unwrap(), 0.0);
        assert!(eval_cost(&mu, &TargetSignal::new(vec![0.5]).unwrap(), &phi).is_err());
    }

    #[test]
    fn grad_examples() {
        let phi = phi2();
        assert!(grad_cost(&[0.25; 4], 0.5, &phi).iter().all(|g| *g == 0.0));
        let g = grad_cost(&[0.2, 0.2, 0.3, 0.3], 0.5, &phi);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 0.0);
        assert!((g[2] - 0.2).abs() < 1e-15 && (g[3] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_bound(1), 2.0);
        assert_eq!(lipschitz_bound(144), 24.0);
        assert_eq!(lipschitz_bound(4), 4.0);
    }

    #[test]
    fn one_hour_step() {
        let d = step_deviation(30, 6, 0.10, 144).unwrap();
        let v = d.values();
        assert!(v[..30].iter().all(|x| *x == 0.0));
        assert!(v[30..36].iter().all(|x| *x == 0.10));
        assert!((v[36] + 0.10 * 6.0 / 108.0).abs() < 1e-15);
        assert!((v[143] + 0.005_555_555_555_555_56).abs() < 1e-15);
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
        assert!(step_deviation(30, 6, 0.0, 144).unwrap().values().iter().all(|x| *x == 0.0));
        assert!(step_deviation(138, 6, 0.1, 144).is_err());
        assert!(step_deviation(140, 6, 0.1, 144).is_err());
    }

    #[test]
    fn target_construction() {
        let zero = DeviationSignal::new(vec![0.0; 144]).unwrap();
        let base = vec![0.05; 144];
        assert_eq!(build_target(&base, &zero).unwrap().0.values(), &base[..]);

        let dev = step_deviation(30, 6, 0.10, 144).unwrap();
        let (t, clamped) = build_target(&base, &dev).unwrap();
        assert!((t.at(31) - 0.15).abs() < 1e-15);
        assert_eq!(clamped, 0);

        let (t, clamped) = build_target(&vec![0.99; 144], &dev).unwrap();
        assert_eq!(t.at(31), 1.0);
        assert_eq!(clamped, 6);
    }

    #[test]
    fn deviation_requires_zero_energy() {
        assert!(DeviationSignal::new(vec![0.1, 0.0]).is_err());
        assert!(TargetSignal::new(vec![1.2]).is_err());
    }

    #[test]
    fn eight_hour_window() {
        // 07:00 quiet, 11:00-19:00 up, balanced over 54 low steps
        let d = window_deviation(42, 66, 48, 0.10, 144).unwrap();
        let v = d.values();
        assert_eq!(v[41], 0.0);
        assert!((v[42] + 0.10 * 48.0 / 54.0).abs() < 1e-15);
        assert_eq!(v[66], 0.10);
        assert_eq!(v[113], 0.10);
        assert!((v[114] - v[42]).abs() < 1e-15);
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
        assert!(window_deviation(42, 40, 4, 0.1, 144).is_err());
    }
}
