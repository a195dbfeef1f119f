//! Finite-horizon MDP primitives.
//!
//! Time runs over `n = 0..=N`. The initial state-action distribution `μ_0`
//! is fixed; policies `π_n` and kernels `p_n` are indexed `n = 1..=N`, where
//! `p_n(x'|x, a)` moves the population from step `n - 1` to step `n`.
//!
//! Joint distributions over `X × A` are stored dense with index
//! `x * |A| + a`.

use crate::error::{config_err, input_err, Result};

/// Tolerance used for every stochasticity check.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Heater state space: `(mode, temperature)` pairs with the OFF block first
/// and temperatures ascending within each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    t_amb: i32,
    t_max: i32,
}

impl StateSpace {
    pub fn new(t_amb: i32, t_max: i32) -> Result<Self> {
        if t_amb > t_max {
            return input_err(format!("ambient temperature {t_amb} above maximum {t_max}"));
        }
        Ok(Self { t_amb, t_max })
    }

    pub fn t_amb(&self) -> i32 {
        self.t_amb
    }

    pub fn t_max(&self) -> i32 {
        self.t_max
    }

    /// Number of temperature levels `|Θ|`.
    pub fn n_temps(&self) -> usize {
        (self.t_max - self.t_amb + 1) as usize
    }

    /// `|X| = 2 |Θ|`.
    pub fn len(&self) -> usize {
        2 * self.n_temps()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, mode: u8, temp: i32) -> Result<usize> {
        if mode > 1 {
            return input_err(format!("operating mode must be 0 or 1, got {mode}"));
        }
        if temp < self.t_amb || temp > self.t_max {
            return input_err(format!(
                "temperature {temp} outside [{}, {}]",
                self.t_amb, self.t_max
            ));
        }
        Ok(mode as usize * self.n_temps() + (temp - self.t_amb) as usize)
    }

    pub fn decode(&self, index: usize) -> Result<(u8, i32)> {
        if index >= self.len() {
            return input_err(format!("state index {index} out of range {}", self.len()));
        }
        let n = self.n_temps();
        Ok(((index / n) as u8, self.t_amb + (index % n) as i32))
    }

    /// Iterates `(index, mode, temp)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u8, i32)> + '_ {
        let n = self.n_temps();
        (0..self.len()).map(move |i| (i, (i / n) as u8, self.t_amb + (i % n) as i32))
    }
}

/// Time-indexed conditional action distributions `π_n(a|x)`, `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySequence {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    probs: Vec<f64>,
}

impl PolicySequence {
    /// Builds a policy from a function returning `π_n(·|x)` as a slice-like row.
    pub fn from_fn<F>(n_states: usize, n_actions: usize, horizon: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut probs = Vec::with_capacity(horizon * n_states * n_actions);
        for n in 1..=horizon {
            for x in 0..n_states {
                let row = f(n, x);
                if row.len() != n_actions {
                    return config_err(format!(
                        "policy row (n={n}, x={x}) has {} actions, expected {n_actions}",
                        row.len()
                    ));
                }
                probs.extend(row);
            }
        }
        let p = Self { n_states, n_actions, horizon, probs };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self {
            n_states,
            n_actions,
            horizon,
            probs: vec![1.0 / n_actions as f64; horizon * n_states * n_actions],
        }
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

    fn offset(&self, n: usize, x: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.horizon, "policy step {n} out of 1..={}", self.horizon);
        ((n - 1) * self.n_states + x) * self.n_actions
    }

    /// `π_n(·|x)`.
    pub fn row(&self, n: usize, x: usize) -> &[f64] {
        let o = self.offset(n, x);
        &self.probs[o..o + self.n_actions]
    }

    pub fn row_mut(&mut self, n: usize, x: usize) -> &mut [f64] {
        let o = self.offset(n, x);
        &mut self.probs[o..o + self.n_actions]
    }

    pub fn prob(&self, n: usize, x: usize, a: usize) -> f64 {
        self.row(n, x)[a]
    }

    /// All entries for step `n`, laid out `x * |A| + a`.
    pub fn step(&self, n: usize) -> &[f64] {
        let o = self.offset(n, 0);
        &self.probs[o..o + self.n_states * self.n_actions]
    }

    /// Every row nonnegative and summing to one.
    pub fn validate(&self) -> Result<()> {
        for n in 1..=self.horizon {
            for x in 0..self.n_states {
                let row = self.row(n, x);
                if row.iter().any(|p| p.is_nan() || *p < 0.0 || *p > 1.0 + STOCHASTIC_TOL) {
                    return input_err(format!("policy row (n={n}, x={x}) has entries outside [0,1]"));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    return input_err(format!("policy row (n={n}, x={x}) sums to {s}"));
                }
            }
        }
        Ok(())
    }

    /// Minimum entry is strictly positive, i.e. the induced distribution lies
    /// in the interior set where the divergence Γ is finite.
    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Time-indexed joint state-action distributions `μ_n(x, a)`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSequence {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    mass: Vec<f64>,
}

impl DistributionSequence {
    /// Wraps raw slices `μ_0, ..., μ_N`, each of length `|X||A|`.
    pub fn from_slices(n_states: usize, n_actions: usize, slices: Vec<Vec<f64>>) -> Result<Self> {
        if slices.is_empty() {
            return config_err("distribution sequence needs at least μ_0");
        }
        let width = n_states * n_actions;
        let mut mass = Vec::with_capacity(slices.len() * width);
        for (n, s) in slices.iter().enumerate() {
            if s.len() != width {
                return config_err(format!("μ_{n} has {} cells, expected {width}", s.len()));
            }
            mass.extend_from_slice(s);
        }
        Ok(Self { n_states, n_actions, horizon: slices.len() - 1, mass })
    }

    pub(crate) fn zeros(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self { n_states, n_actions, horizon, mass: vec![0.0; (horizon + 1) * n_states * n_actions] }
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

    fn width(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// `μ_n` as a flat `x * |A| + a` table.
    pub fn slice(&self, n: usize) -> &[f64] {
        let w = self.width();
        &self.mass[n * w..(n + 1) * w]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.mass[n * w..(n + 1) * w]
    }

    /// `ρ_n`.
    pub fn marginal(&self, n: usize) -> Vec<f64> {
        marginal(self.slice(n), self.n_actions)
    }

    /// Each slice nonnegative and summing to one.
    pub fn validate(&self) -> Result<()> {
        for n in 0..=self.horizon {
            check_distribution(self.slice(n), &format!("μ_{n}"))?;
        }
        Ok(())
    }

    /// `Σ_n ‖μ_n − μ'_n‖₁` over `n = 1..=N`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        (1..=self.horizon).map(|n| l1(self.slice(n), other.slice(n))).sum()
    }

    /// `sup_{n ≥ 1} ‖μ_n − μ'_n‖₁`.
    pub fn sup_l1_distance(&self, other: &Self) -> f64 {
        (1..=self.horizon).map(|n| l1(self.slice(n), other.slice(n))).fold(0.0, f64::max)
    }

    /// Largest absolute cellwise difference over all steps.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `t·self + (1 − t)·other`, slice by slice.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        let mass = self.mass.iter().zip(&other.mass).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Self { mass, ..*self }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn check_distribution(d: &[f64], what: &str) -> Result<()> {
    if d.iter().any(|p| p.is_nan() || *p < 0.0) {
        return input_err(format!("{what} has negative or NaN entries"));
    }
    let s: f64 = d.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return input_err(format!("{what} sums to {s}, expected 1"));
    }
    Ok(())
}

/// `ρ(x) = Σ_a μ(x, a)` for a flat joint table.
pub fn marginal(joint: &[f64], n_actions: usize) -> Vec<f64> {
    joint.chunks(n_actions).map(|row| row.iter().sum()).collect()
}

/// Time-indexed transition tables `p_n(x'|x, a)`, `n = 1..=N`, stored as
/// sparse rows.
#[derive(Debug, Clone)]
pub struct TimedKernel {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    row_start: Vec<usize>,
    succ: Vec<usize>,
    prob: Vec<f64>,
}

impl TimedKernel {
    /// Builds a kernel from a function returning the sparse successor list
    /// of `(n, x, a)`. Zero-probability entries are dropped.
    pub fn from_rows<F>(n_states: usize, n_actions: usize, horizon: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Vec<(usize, f64)>,
    {
        let mut row_start = Vec::with_capacity(horizon * n_states * n_actions + 1);
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        row_start.push(0);
        for n in 1..=horizon {
            for x in 0..n_states {
                for a in 0..n_actions {
                    for (xn, p) in f(n, x, a) {
                        if xn >= n_states {
                            return config_err(format!(
                                "kernel row (n={n}, x={x}, a={a}) points at state {xn} of {n_states}"
                            ));
                        }
                        if p != 0.0 {
                            succ.push(xn);
                            prob.push(p);
                        }
                    }
                    row_start.push(succ.len());
                }
            }
        }
        let k = Self { n_states, n_actions, horizon, row_start, succ, prob };
        k.validate()?;
        Ok(k)
    }

    /// Builds a kernel from dense rows `p_n(·|x, a)` of length `|X|`.
    pub fn from_dense<F>(n_states: usize, n_actions: usize, horizon: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> Vec<f64>,
    {
        Self::from_rows(n_states, n_actions, horizon, |n, x, a| {
            f(n, x, a).into_iter().enumerate().collect()
        })
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

    fn row_index(&self, n: usize, x: usize, a: usize) -> usize {
        debug_assert!(n >= 1 && n <= self.horizon);
        ((n - 1) * self.n_states + x) * self.n_actions + a
    }

    /// Nonzero successors `(x', p_n(x'|x, a))`.
    pub fn row(&self, n: usize, x: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_index(n, x, a);
        let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
        self.succ[lo..hi].iter().copied().zip(self.prob[lo..hi].iter().copied())
    }

    pub fn prob(&self, n: usize, x: usize, a: usize, xn: usize) -> f64 {
        self.row(n, x, a).filter(|(s, _)| *s == xn).map(|(_, p)| p).sum()
    }

    /// Largest row-sum deviation from one.
    pub fn max_row_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.row_start.len() - 1 {
            let s: f64 = self.prob[self.row_start[r]..self.row_start[r + 1]].iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// Largest number of successors over all rows.
    pub fn max_support(&self) -> usize {
        self.row_start.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prob.iter().any(|p| !(*p >= 0.0 && *p <= 1.0 + STOCHASTIC_TOL)) {
            return input_err("kernel has entries outside [0,1]");
        }
        let err = self.max_row_error();
        if err > STOCHASTIC_TOL {
            return input_err(format!("kernel row sums deviate from 1 by {err:e}"));
        }
        Ok(())
    }

    /// `Σ_{x,a} p_n(·|x,a) μ(x,a)`: the state marginal reached at step `n`.
    pub fn push_forward(&self, n: usize, joint: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.n_states];
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                let m = joint[x * self.n_actions + a];
                if m == 0.0 {
                    continue;
                }
                for (xn, p) in self.row(n, x, a) {
                    next[xn] += m * p;
                }
            }
        }
        next
    }

    /// Expectation `Σ_{x'} p_n(x'|x,a) v(x')`.
    pub fn expect(&self, n: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        self.row(n, x, a).map(|(xn, p)| p * v[xn]).sum()
    }

    /// All entries as `(n, x, a, x', p)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        (1..=self.horizon).flat_map(move |n| {
            (0..self.n_states).flat_map(move |x| {
                (0..self.n_actions)
                    .flat_map(move |a| self.row(n, x, a).map(move |(xn, p)| (n, x, a, xn, p)))
            })
        })
    }
}

fn check_dims(mu0: &[f64], policy: &PolicySequence, kernel: &TimedKernel) -> Result<()> {
    let (nx, na) = (kernel.n_states(), kernel.n_actions());
    if policy.n_states() != nx || policy.n_actions() != na {
        return config_err(format!(
            "policy is {}x{}, kernel is {nx}x{na}",
            policy.n_states(),
            policy.n_actions()
        ));
    }
    if policy.horizon() != kernel.horizon() {
        return config_err(format!(
            "policy horizon {} differs from kernel horizon {}",
            policy.horizon(),
            kernel.horizon()
        ));
    }
    if mu0.len() != nx * na {
        return config_err(format!("μ_0 has {} cells, expected {}", mu0.len(), nx * na));
    }
    Ok(())
}

/// Distribution sequence induced by `policy` from `μ_0`:
/// `μ_{n+1}(x', a') = π_{n+1}(a'|x') Σ_{x,a} μ_n(x,a) p_{n+1}(x'|x,a)`.
pub fn propagate(mu0: &[f64], policy: &PolicySequence, kernel: &TimedKernel) -> Result<DistributionSequence> {
    check_dims(mu0, policy, kernel)?;
    check_distribution(mu0, "μ_0")?;
    let (nx, na, horizon) = (kernel.n_states(), kernel.n_actions(), kernel.horizon());
    let mut out = DistributionSequence::zeros(nx, na, horizon);
    out.slice_mut(0).copy_from_slice(mu0);
    for n in 1..=horizon {
        let rho = kernel.push_forward(n, out.slice(n - 1));
        let next = out.slice_mut(n);
        for x in 0..nx {
            let row = policy.row(n, x);
            for a in 0..na {
                next[x * na + a] = rho[x] * row[a];
            }
        }
    }
    Ok(out)
}

/// Recovers `π_n(a|x) = μ_n(x,a) / ρ_n(x)`; rows with `ρ_n(x) = 0` become
/// uniform.
pub fn policy_from_distribution(mu: &DistributionSequence) -> PolicySequence {
    let (nx, na, horizon) = (mu.n_states(), mu.n_actions(), mu.horizon());
    let mut policy = PolicySequence::uniform(nx, na, horizon);
    for n in 1..=horizon {
        let slice = mu.slice(n);
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
    policy
}

/// Outcome of a flow-balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCheck {
    pub feasible: bool,
    pub max_violation: f64,
}

/// Checks `Σ_{a'} μ_{n+1}(x',a') = Σ_{x,a} p_{n+1}(x'|x,a) μ_n(x,a)` for every
/// step and state.
pub fn verify_flow(mu: &DistributionSequence, kernel: &TimedKernel, tol: f64) -> FlowCheck {
    let mut worst = 0.0f64;
    for n in 1..=mu.horizon().min(kernel.horizon()) {
        let expected = kernel.push_forward(n, mu.slice(n - 1));
        let actual = mu.marginal(n);
        for (e, a) in expected.iter().zip(&actual) {
            worst = worst.max((e - a).abs());
        }
    }
    FlowCheck { feasible: worst <= tol, max_violation: worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// |X| = 2, |A| = 2, N = 2, action `a` sends the chain to state `a`.
    fn tiny_kernel() -> TimedKernel {
        TimedKernel::from_rows(2, 2, 2, |_, _, a| vec![(a, 1.0)]).unwrap()
    }

    #[test]
    fn encode_convention() {
        let s = StateSpace::new(25, 65).unwrap();
        assert_eq!(s.len(), 82);
        assert_eq!(s.encode(0, 25).unwrap(), 0);
        assert_eq!(s.encode(1, 25).unwrap(), 41);
        assert_eq!(s.decode(s.encode(1, 55).unwrap()).unwrap(), (1, 55));
        assert!(s.encode(0, 66).is_err());
        assert!(s.encode(1, 24).is_err());
        assert!(s.decode(82).is_err());
        for (i, m, t) in s.iter() {
            assert_eq!(s.encode(m, t).unwrap(), i);
        }
    }

    #[test]
    fn uniform_policy_on_tiny_fixture() {
        let k = tiny_kernel();
        let pi = PolicySequence::uniform(2, 2, 2);
        let mu = propagate(&[0.25; 4], &pi, &k).unwrap();
        for v in mu.slice(1) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_chain() {
        let k = tiny_kernel();
        let pi = PolicySequence::from_fn(2, 2, 2, |_, _| vec![1.0, 0.0]).unwrap();
        // point mass at (s0, a=1) moves to s1, policy picks a=0
        let mu = propagate(&[0.0, 1.0, 0.0, 0.0], &pi, &k).unwrap();
        assert_eq!(mu.slice(1), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn propagate_rejects_bad_inputs() {
        let k = tiny_kernel();
        let pi = PolicySequence::uniform(2, 2, 2);
        assert!(matches!(propagate(&[0.5, 0.5, 0.5, 0.5], &pi, &k), Err(crate::Error::Input(_))));
        assert!(matches!(propagate(&[1.0, 0.0], &pi, &k), Err(crate::Error::Config(_))));
        let short = PolicySequence::uniform(2, 2, 1);
        assert!(matches!(propagate(&[0.25; 4], &short, &k), Err(crate::Error::Config(_))));
    }

    #[test]
    fn marginal_examples() {
        assert_eq!(marginal(&[0.25; 4], 2), vec![0.5, 0.5]);
        let r = marginal(&[0.2, 0.3, 0.5, 0.0], 2);
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
        assert_eq!(marginal(&[0.0, 0.0, 1.0, 0.0], 2), vec![0.0, 1.0]);
    }

    #[test]
    fn policy_recovery_and_tie_break() {
        let mu = DistributionSequence::from_slices(
            2,
            2,
            vec![vec![0.25; 4], vec![0.2, 0.3, 0.0, 0.0]],
        )
        .unwrap();
        let pi = policy_from_distribution(&mu);
        assert!((pi.prob(1, 0, 0) - 0.4).abs() < 1e-15);
        assert!((pi.prob(1, 0, 1) - 0.6).abs() < 1e-15);
        assert_eq!(pi.row(1, 1), &[0.5, 0.5]);
    }

    #[test]
    fn flow_check_detects_perturbation() {
        let k = tiny_kernel();
        let pi = PolicySequence::from_fn(2, 2, 2, |_, _| vec![0.3, 0.7]).unwrap();
        let mu = propagate(&[0.1, 0.2, 0.3, 0.4], &pi, &k).unwrap();
        let ok = verify_flow(&mu, &k, 1e-12);
        assert!(ok.feasible && ok.max_violation <= 1e-12);

        let mut bad = mu.clone();
        let s = bad.slice_mut(1);
        s[0] += 0.01;
        let total: f64 = s.iter().sum();
        s.iter_mut().for_each(|v| *v /= total);
        assert!(!verify_flow(&bad, &k, 1e-12).feasible);
    }

    #[test]
    fn flow_check_hand_built() {
        // one step, p(x'|x,a) = 0.5 for both x' regardless of (x,a)
        let k = TimedKernel::from_rows(2, 2, 1, |_, _, _| vec![(0, 0.5), (1, 0.5)]).unwrap();
        let mu = DistributionSequence::from_slices(
            2,
            2,
            vec![vec![0.7, 0.1, 0.1, 0.1], vec![0.5, 0.0, 0.1, 0.4]],
        )
        .unwrap();
        assert!(verify_flow(&mu, &k, 1e-12).feasible);
    }

    #[test]
    fn kernel_rejects_non_stochastic_rows() {
        assert!(TimedKernel::from_rows(2, 1, 1, |_, _, _| vec![(0, 0.5)]).is_err());
        assert!(TimedKernel::from_rows(2, 1, 1, |_, _, _| vec![(2, 1.0)]).is_err());
    }
}
