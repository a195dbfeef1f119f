//! Monte-Carlo simulation of a finite heater fleet.
//!
//! Every heater owns a ChaCha stream selected by its index under the master
//! seed, so a trace depends only on `(inputs, seed)` and not on how heaters
//! are scheduled.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, input_err, Result};
use crate::heater::{euler_step, next_operating_state, DrainProfile, HeaterParams};
use crate::mdp::{check_distribution, PolicySequence, StateSpace};

/// Trajectories of a simulated fleet over steps `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetTrace {
    fleet_size: usize,
    horizon: usize,
    steps_per_day: f64,
    /// Fraction of heaters ON at each step.
    pub mean_consumption: Vec<f64>,
    modes: Vec<u8>,
    temps: Vec<i16>,
}

impl FleetTrace {
    /// Builds a trace from per-heater mode sequences; temperatures are left
    /// at zero.
    pub fn from_modes(modes: Vec<Vec<u8>>, steps_per_day: f64) -> Result<Self> {
        let Some(first) = modes.first() else {
            return input_err("empty fleet");
        };
        let points = first.len();
        if points < 2 || modes.iter().any(|m| m.len() != points) {
            return input_err("mode sequences must share a length of at least 2");
        }
        let fleet_size = modes.len();
        let mean_consumption = (0..points)
            .map(|n| modes.iter().map(|m| m[n] as f64).sum::<f64>() / fleet_size as f64)
            .collect();
        let flat: Vec<u8> = modes.into_iter().flatten().collect();
        Ok(Self {
            fleet_size,
            horizon: points - 1,
            steps_per_day,
            mean_consumption,
            temps: vec![0; flat.len()],
            modes: flat,
        })
    }

    pub fn fleet_size(&self) -> usize {
        self.fleet_size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Mode sequence of heater `i` over `n = 0..=N`.
    pub fn modes(&self, i: usize) -> &[u8] {
        let w = self.horizon + 1;
        &self.modes[i * w..(i + 1) * w]
    }

    pub fn temps(&self, i: usize) -> &[i16] {
        let w = self.horizon + 1;
        &self.temps[i * w..(i + 1) * w]
    }

    /// Mode switches of heater `i` over the controlled steps `n = 1..=N`.
    pub fn switches(&self, i: usize) -> usize {
        self.modes(i)[1..].windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Writes one row per heater and step: `heater,step,mode,temp`.
    pub fn write_heaters_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "heater,step,mode,temp")?;
        for i in 0..self.fleet_size {
            for (n, (m, t)) in self.modes(i).iter().zip(self.temps(i)).enumerate() {
                writeln!(out, "{i},{n},{m},{t}")?;
            }
        }
        Ok(())
    }
}

/// Mean daily switch count per heater: switches over `n = 1..=N`, scaled by
/// `steps_per_day / N`.
pub fn count_switches(trace: &FleetTrace) -> f64 {
    let total: usize = (0..trace.fleet_size).map(|i| trace.switches(i)).sum();
    total as f64 / trace.fleet_size as f64 * trace.steps_per_day / trace.horizon as f64
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn sample_action(row: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    for (a, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a as u8;
        }
    }
    // rounding left u above the total: take the last action with mass
    row.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u8
}

/// Simulates `fleet_size` independent heaters following `policy`.
///
/// `init` is a joint distribution over `X × A` (the same `μ_0` the mean-field
/// model starts from). Each step draws the drain event, applies the Euler
/// step, rounds stochastically, maps the action to the next mode through the
/// deadband and samples the next action.
pub fn simulate_population(
    fleet_size: usize,
    policy: &PolicySequence,
    params: &HeaterParams,
    drain: &DrainProfile,
    init: &[f64],
    seed: u64,
) -> Result<FleetTrace> {
    if fleet_size == 0 {
        return input_err("fleet size must be at least 1");
    }
    params.validate()?;
    let space = params.state_space();
    let horizon = policy.horizon();
    if policy.n_states() != space.len() || policy.n_actions() != 2 {
        return config_err("policy does not match the heater state space");
    }
    if drain.len() != horizon {
        return config_err(format!("drain has {} steps, policy has {horizon}", drain.len()));
    }
    if init.len() != 2 * space.len() {
        return config_err(format!("initial distribution has {} cells, expected {}", init.len(), 2 * space.len()));
    }
    check_distribution(init, "initial distribution")?;
    let mut cdf: Vec<f64> = init
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    // cells after the last one with mass are never drawn
    let last = init.iter().rposition(|p| *p > 0.0).expect("normalized");
    cdf[last..].iter_mut().for_each(|c| *c = f64::INFINITY);

    let width = horizon + 1;
    let mut modes = vec![0u8; fleet_size * width];
    let mut temps = vec![0i16; fleet_size * width];
    for i in 0..fleet_size {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let cell = sample_index(&cdf, rng.gen::<f64>());
        let (mut mode, mut temp) = space.decode(cell / 2)?;
        let mut action = (cell % 2) as u8;
        modes[i * width] = mode;
        temps[i * width] = temp as i16;
        for n in 1..=horizon {
            let drained = rng.gen::<f64>() < drain.q[n - 1];
            let next = euler_step(temp as f64, mode, drained, drain.d_liters[n - 1], params);
            let lo = next.floor();
            let rounded = if rng.gen::<f64>() < next - lo { lo + 1.0 } else { lo } as i32;
            mode = next_operating_state(action, rounded as f64, params);
            temp = rounded.clamp(params.t_amb, params.t_max);
            modes[i * width + n] = mode;
            temps[i * width + n] = temp as i16;
            let x = space.encode(mode, temp)?;
            action = sample_action(policy.row(n, x), rng.gen::<f64>());
        }
    }
    let mean_consumption = (0..width)
        .map(|n| (0..fleet_size).map(|i| modes[i * width + n] as f64).sum::<f64>() / fleet_size as f64)
        .collect();
    Ok(FleetTrace {
        fleet_size,
        horizon,
        steps_per_day: params.steps_per_day(),
        mean_consumption,
        modes,
        temps,
    })
}

/// Nominal rule with probability `δ` of choosing the other action.
pub fn perturbed_nominal_policy(space: &StateSpace, horizon: usize, delta: f64) -> Result<PolicySequence> {
    if !(delta > 0.0 && delta <= 0.5) {
        return input_err(format!("deviation {delta} outside (0, 0.5]"));
    }
    let nt = space.n_temps();
    PolicySequence::from_fn(space.len(), 2, horizon, |_, x| {
        if x < nt {
            vec![1.0 - delta, delta]
        } else {
            vec![delta, 1.0 - delta]
        }
    })
}

/// Writes `step,mean_consumption,target,nominal_consumption` for `n = 1..=N`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &FleetTrace, target: &[f64], nominal: &[f64]) -> Result<()> {
    if target.len() != trace.horizon || nominal.len() != trace.horizon {
        return config_err("trace, target and nominal series differ in length");
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,mean_consumption,target,nominal_consumption")?;
    for n in 1..=trace.horizon {
        writeln!(
            out,
            "{n},{},{},{}",
            trace.mean_consumption[n],
            target[n - 1],
            nominal[n - 1]
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heater::{nominal_joint, nominal_policy};

    #[test]
    fn switch_counting() {
        let flat = FleetTrace::from_modes(vec![vec![1; 144]], 144.0).unwrap();
        assert_eq!(count_switches(&flat), 0.0);
        // 144 points: n = 0 plus 143 controlled steps
        let alt: Vec<u8> = (0..145).map(|n| (n % 2) as u8).collect();
        let t = FleetTrace::from_modes(vec![alt], 144.0).unwrap();
        assert_eq!(count_switches(&t), 143.0);
    }

    #[test]
    fn perturbed_rows() {
        let s = StateSpace::new(25, 65).unwrap();
        let p = perturbed_nominal_policy(&s, 2, 0.1).unwrap();
        assert_eq!(p.row(1, s.encode(1, 55).unwrap()), &[0.1, 0.9]);
        assert_eq!(p.row(2, s.encode(0, 55).unwrap()), &[0.9, 0.1]);
        let half = perturbed_nominal_policy(&s, 2, 0.5).unwrap();
        assert_eq!(half, PolicySequence::uniform(82, 2, 2));
        assert!(perturbed_nominal_policy(&s, 2, 0.0).is_err());
        assert!(perturbed_nominal_policy(&s, 2, 0.6).is_err());
    }

    #[test]
    fn seed_determinism_and_conservation() {
        let p = HeaterParams::reference();
        let s = p.state_space();
        let drain = crate::heater::synth_drain_profile(1, 144, &Default::default()).unwrap();
        let mut rho = vec![0.0; s.len()];
        rho[s.encode(1, 55).unwrap()] = 0.5;
        rho[s.encode(0, 60).unwrap()] = 0.5;
        let init = nominal_joint(&s, &rho);
        let pi = nominal_policy(&s, 144);
        let a = simulate_population(50, &pi, &p, &drain, &init, 9).unwrap();
        let b = simulate_population(50, &pi, &p, &drain, &init, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_population(50, &pi, &p, &drain, &init, 10).unwrap();
        assert_ne!(a, c);
        assert!(a.mean_consumption.iter().all(|m| (0.0..=1.0).contains(m)));
    }
}
