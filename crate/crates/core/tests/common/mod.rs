//! Random small instances and brute-force oracles shared by the test targets.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tcl_mfc::mdp::{DistributionSequence, PolicySequence, TimedKernel};
use tcl_mfc::objective::{ConsumptionObservable, TargetSignal};
use tcl_mfc::solvers::{MFCProblem, StepTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Random point of the simplex; with `sparse`, some coordinates may be zero.
pub fn simplex(rng: &mut impl Rng, k: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..k)
            .map(|_| {
                let u: f64 = rng.gen::<f64>();
                if sparse && rng.gen_bool(0.3) {
                    0.0
                } else {
                    -(u.max(1e-300)).ln()
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            return v;
        }
    }
}

/// Interior simplex point with every coordinate at least `floor`.
pub fn interior(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let v = simplex(rng, k, false);
    v.iter().map(|x| floor + (1.0 - k as f64 * floor) * x).collect()
}

pub fn kernel(rng: &mut impl Rng, nx: usize, na: usize, horizon: usize, sparse: bool) -> TimedKernel {
    TimedKernel::from_dense(nx, na, horizon, |_, _, _| simplex(rng, nx, sparse)).unwrap()
}

pub fn policy(rng: &mut impl Rng, nx: usize, na: usize, horizon: usize) -> PolicySequence {
    PolicySequence::from_fn(nx, na, horizon, |_, _| interior(rng, na, 0.02)).unwrap()
}

pub fn deterministic_policy(nx: usize, na: usize, horizon: usize, code: usize) -> PolicySequence {
    let mut c = code;
    PolicySequence::from_fn(nx, na, horizon, |_, _| {
        let a = c % na;
        c /= na;
        (0..na).map(|b| if b == a { 1.0 } else { 0.0 }).collect()
    })
    .unwrap()
}

pub fn observable(rng: &mut impl Rng, nx: usize) -> ConsumptionObservable {
    ConsumptionObservable::new((0..nx).map(|_| rng.gen::<f64>()).collect())
}

pub fn target(rng: &mut impl Rng, horizon: usize) -> TargetSignal {
    TargetSignal::new((0..horizon).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn problem(rng: &mut impl Rng, nx: usize, na: usize, horizon: usize) -> MFCProblem {
    let k = kernel(rng, nx, na, horizon, false);
    let mu0 = simplex(rng, nx * na, false);
    MFCProblem::new(k, mu0, target(rng, horizon), observable(rng, nx)).unwrap()
}

pub fn reward(rng: &mut impl Rng, nx: usize, na: usize, horizon: usize) -> StepTable {
    StepTable::from_fn(nx, na, horizon, |_, _, _| rng.gen_range(-1.0..1.0))
}

/// A trajectory `(x_0, a_0), ..., (x_N, a_N)` and its probability.
pub struct Path {
    pub steps: Vec<(usize, usize)>,
    pub prob: f64,
}

/// Every trajectory with positive probability under `(μ_0, π, p)`.
pub fn enumerate_paths(mu0: &[f64], policy: &PolicySequence, kernel: &TimedKernel) -> Vec<Path> {
    let (nx, na) = (kernel.n_states(), kernel.n_actions());
    let mut paths: Vec<Path> = (0..nx * na)
        .filter(|&c| mu0[c] > 0.0)
        .map(|c| Path { steps: vec![(c / na, c % na)], prob: mu0[c] })
        .collect();
    for n in 1..=kernel.horizon() {
        let mut next = Vec::new();
        for p in &paths {
            let (x, a) = *p.steps.last().unwrap();
            for xn in 0..nx {
                let t = kernel.prob(n, x, a, xn);
                for an in 0..na {
                    let w = p.prob * t * policy.prob(n, xn, an);
                    if w > 0.0 {
                        let mut steps = p.steps.clone();
                        steps.push((xn, an));
                        next.push(Path { steps, prob: w });
                    }
                }
            }
        }
        paths = next;
    }
    paths
}

/// Marginals of the path measure, `n = 0..=N`.
pub fn path_marginals(paths: &[Path], nx: usize, na: usize, horizon: usize) -> DistributionSequence {
    let mut slices = vec![vec![0.0; nx * na]; horizon + 1];
    for p in paths {
        for (n, &(x, a)) in p.steps.iter().enumerate() {
            slices[n][x * na + a] += p.prob;
        }
    }
    DistributionSequence::from_slices(nx, na, slices).unwrap()
}

/// `KL(P^π ‖ P^{π'})` between path measures sharing `μ_0` and the kernel.
pub fn path_kl(mu0: &[f64], pi: &PolicySequence, pi_ref: &PolicySequence, kernel: &TimedKernel) -> f64 {
    let p = enumerate_paths(mu0, pi, kernel);
    let q = enumerate_paths(mu0, pi_ref, kernel);
    let q_prob = |steps: &[(usize, usize)]| {
        q.iter().find(|r| r.steps == steps).map_or(0.0, |r| r.prob)
    };
    p.iter().map(|path| path.prob * (path.prob / q_prob(&path.steps)).ln()).sum()
}

/// `E[Σ_{m ≥ n} r_m(x_m, a_m) | x_n = x, a_n = a]` under `π`, by enumerating
/// continuations.
pub fn q_by_enumeration(
    r: &StepTable,
    kernel: &TimedKernel,
    policy: &PolicySequence,
    n: usize,
    x: usize,
    a: usize,
) -> f64 {
    let horizon = kernel.horizon();
    let mut value = r.get(n, x, a);
    if n == horizon {
        return value;
    }
    for xn in 0..kernel.n_states() {
        let t = kernel.prob(n + 1, x, a, xn);
        if t == 0.0 {
            continue;
        }
        for an in 0..kernel.n_actions() {
            let w = policy.prob(n + 1, xn, an);
            if w > 0.0 {
                value += t * w * q_by_enumeration(r, kernel, policy, n + 1, xn, an);
            }
        }
    }
    value
}

/// `max_π Σ_n ⟨r_n, μ_n^π⟩` over all deterministic Markov policies.
pub fn best_value_by_enumeration(r: &StepTable, kernel: &TimedKernel, mu0: &[f64]) -> f64 {
    let (nx, na, horizon) = (kernel.n_states(), kernel.n_actions(), kernel.horizon());
    let count = na.pow((nx * horizon) as u32);
    (0..count)
        .map(|code| {
            let pi = deterministic_policy(nx, na, horizon, code);
            let mu = tcl_mfc::mdp::propagate(mu0, &pi, kernel).unwrap();
            tcl_mfc::solvers::policy_value(r, &mu)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Dense textbook version of the entropy-regularized backward pass:
/// `π ∝ π_prev · exp(τ Q̃)`, `V = (1/τ) log Σ π_prev exp(τ Q̃)`.
pub fn soft_backward_oracle(
    r: &StepTable,
    kernel: &TimedKernel,
    prev: &PolicySequence,
    tau: f64,
) -> Vec<Vec<Vec<f64>>> {
    let (nx, na, horizon) = (kernel.n_states(), kernel.n_actions(), kernel.horizon());
    let mut out = vec![vec![vec![0.0; na]; nx]; horizon + 1];
    let mut v_next = vec![0.0; nx];
    for n in (1..=horizon).rev() {
        let mut v = vec![0.0; nx];
        for x in 0..nx {
            let q: Vec<f64> = (0..na)
                .map(|a| {
                    let cont: f64 = if n < horizon {
                        (0..nx).map(|xn| kernel.prob(n + 1, x, a, xn) * v_next[xn]).sum()
                    } else {
                        0.0
                    };
                    r.get(n, x, a) + cont
                })
                .collect();
            let w: Vec<f64> = (0..na).map(|a| prev.prob(n, x, a) * (tau * q[a]).exp()).collect();
            let z: f64 = w.iter().sum();
            v[x] = z.ln() / tau;
            out[n][x] = w.iter().map(|wi| wi / z).collect();
        }
        v_next = v;
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
