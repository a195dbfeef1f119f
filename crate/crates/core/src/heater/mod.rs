//! Water-heater dynamics and the transition kernel they induce.
//!
//! A heater is `(m, θ)`: operating mode and integer tank temperature. One step
//! of length `δt` applies an Euler step of
//!
//! ```text
//! dθ/dt = −ρ (θ − T_amb) + σ m p_max − τ (θ − T_in) f(t)
//! ```
//!
//! with a Bernoulli drain, rounds the result stochastically to an integer and
//! sets the next mode from the action through the deadband map `M(a, θ)`.

mod drain;

pub use drain::{load_drain_profile, synth_drain_profile, write_drain_profile, DrainProfile, SynthDrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::mdp::{propagate, PolicySequence, StateSpace, TimedKernel};

/// Tank construction and water properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSpec {
    /// m³
    pub volume: f64,
    /// m
    pub height: f64,
    /// Insulation thickness, m.
    pub insulation_thickness: f64,
    /// Insulation conductivity, W/(m·K).
    pub insulation_conductivity: f64,
    /// kg/m³
    pub water_density: f64,
    /// J/(kg·K)
    pub water_heat_capacity: f64,
    /// Rated electrical power, W.
    pub rated_power: f64,
}

impl Default for PhysicalSpec {
    fn default() -> Self {
        Self {
            volume: 0.2,
            height: 1.37,
            insulation_thickness: 0.035 / 4.0,
            insulation_conductivity: 0.033,
            water_density: 1000.0,
            water_heat_capacity: 4185.0,
            rated_power: 2200.0,
        }
    }
}

impl PhysicalSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("volume", self.volume),
            ("height", self.height),
            ("insulation_thickness", self.insulation_thickness),
            ("insulation_conductivity", self.insulation_conductivity),
            ("water_density", self.water_density),
            ("water_heat_capacity", self.water_heat_capacity),
            ("rated_power", self.rated_power),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return input_err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Coefficients of the temperature ODE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Heat-loss rate ρ, 1/h.
    pub loss: f64,
    /// Joule coefficient σ, K/J.
    pub joule: f64,
    /// Drain coefficient τ, per litre of water drawn.
    pub drain: f64,
}

/// Loss, Joule and drain coefficients from the tank specification.
///
/// The lateral-surface term uses 3.14 rather than π, which reproduces the
/// reference loss rate `ρ = 0.0944893…` /h exactly.
#[allow(clippy::approx_constant)]
pub fn derive_coefficients(spec: &PhysicalSpec) -> Result<Coefficients> {
    spec.validate()?;
    let coef_loss = (spec.insulation_conductivity / spec.insulation_thickness)
        * 2.0
        * 3.14
        * (spec.volume * 3.14 / spec.height).sqrt();
    let loss = coef_loss * 3600.0 / (spec.water_heat_capacity * spec.water_density * spec.volume / spec.height);
    let joule = 1.0 / (spec.volume * spec.water_density * spec.water_heat_capacity);
    // kg of water, i.e. litres
    let drain = 1.0 / (spec.volume * spec.water_density);
    Ok(Coefficients { loss, joule, drain })
}

/// Parameters of the discretized heater model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeaterParams {
    pub t_min: i32,
    pub t_max: i32,
    pub t_amb: i32,
    pub t_in: f64,
    /// Step length in hours.
    pub dt_hours: f64,
    /// ρ, 1/h.
    pub loss_coef: f64,
    /// σ, K/J.
    pub joule_coef: f64,
    /// τ, 1/L.
    pub drain_coef: f64,
    /// Energy delivered by one hour at full power, J.
    pub p_max: f64,
}

impl HeaterParams {
    pub fn from_spec(spec: &PhysicalSpec, t_min: i32, t_max: i32, t_amb: i32, t_in: f64, dt_minutes: f64) -> Result<Self> {
        let c = derive_coefficients(spec)?;
        let p = Self {
            t_min,
            t_max,
            t_amb,
            t_in,
            dt_hours: dt_minutes / 60.0,
            loss_coef: c.loss,
            joule_coef: c.joule,
            drain_coef: c.drain,
            p_max: 3600.0 * spec.rated_power,
        };
        p.validate()?;
        Ok(p)
    }

    /// 200 L tank, deadband [50, 65] °C, 25 °C ambient, 18 °C inlet, 10-minute steps.
    pub fn reference() -> Self {
        Self::from_spec(&PhysicalSpec::default(), 50, 65, 25, 18.0, 10.0).expect("reference parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_amb < self.t_min && self.t_min < self.t_max) {
            return input_err(format!(
                "need T_amb < T_min < T_max, got {} / {} / {}",
                self.t_amb, self.t_min, self.t_max
            ));
        }
        for (name, v) in [
            ("dt", self.dt_hours),
            ("loss_coef", self.loss_coef),
            ("joule_coef", self.joule_coef),
            ("drain_coef", self.drain_coef),
            ("p_max", self.p_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return input_err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace::new(self.t_amb, self.t_max).expect("validated parameters")
    }

    /// Steps in one day at this step length.
    pub fn steps_per_day(&self) -> f64 {
        24.0 / self.dt_hours
    }
}

/// Euler step of the temperature ODE, before clamping. `drawn_litres` is the
/// volume drawn over the step, so the drain rate is `drawn_litres / δt`.
pub fn euler_step(theta: f64, mode: u8, drained: bool, drawn_litres: f64, p: &HeaterParams) -> f64 {
    let loss = -p.loss_coef * (theta - p.t_amb as f64);
    let joule = p.joule_coef * mode as f64 * p.p_max;
    let drain = if drained {
        p.drain_coef * (theta - p.t_in) * drawn_litres / p.dt_hours
    } else {
        0.0
    };
    theta + p.dt_hours * (loss + joule - drain)
}

/// Euler step clamped to `[T_amb, T_max]`.
pub fn temperature_step(theta: f64, mode: u8, drained: bool, drawn_litres: f64, p: &HeaterParams) -> f64 {
    euler_step(theta, mode, drained, drawn_litres, p).clamp(p.t_amb as f64, p.t_max as f64)
}

/// Unbiased stochastic rounding: `⌊θ⌋` with mass `1 − frac(θ)`, `⌈θ⌉` with
/// mass `frac(θ)`.
pub fn rounding_distribution(theta: f64) -> Vec<(i32, f64)> {
    let lo = theta.floor();
    let frac = theta - lo;
    if frac == 0.0 {
        vec![(lo as i32, 1.0)]
    } else {
        vec![(lo as i32, 1.0 - frac), (lo as i32 + 1, frac)]
    }
}

/// Deadband map `M(a, θ)`: follow the action inside `[T_min, T_max]`, force ON
/// below and OFF above.
pub fn next_operating_state(action: u8, theta: f64, p: &HeaterParams) -> u8 {
    if theta < p.t_min as f64 {
        1
    } else if theta > p.t_max as f64 {
        0
    } else {
        action
    }
}

/// Successor distribution of `(mode, temp)` under `action` for one step with
/// drain probability `q` and drawn volume `litres`. The mode map sees the
/// rounded temperature before it is clamped into the state space, so an
/// overshoot past `T_max` switches the heater off.
pub fn transition(
    space: &StateSpace,
    p: &HeaterParams,
    mode: u8,
    temp: i32,
    action: u8,
    q: f64,
    litres: f64,
) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (drained, w_drain) in [(false, 1.0 - q), (true, q)] {
        if w_drain == 0.0 {
            continue;
        }
        let next = euler_step(temp as f64, mode, drained, litres, p);
        for (t, w_round) in rounding_distribution(next) {
            let m = next_operating_state(action, t as f64, p);
            let t = t.clamp(p.t_amb, p.t_max);
            let idx = space.encode(m, t).expect("clamped temperature");
            let w = w_drain * w_round;
            match out.iter_mut().find(|(i, _)| *i == idx) {
                Some(e) => e.1 += w,
                None => out.push((idx, w)),
            }
        }
    }
    out
}

/// Time-indexed kernel `p_n`, `n = 1..=N`, where `p_n` uses the drain of step
/// `n − 1`.
pub fn build_kernel(p: &HeaterParams, drain: &DrainProfile) -> Result<TimedKernel> {
    p.validate()?;
    let space = p.state_space();
    let horizon = drain.len();
    TimedKernel::from_rows(space.len(), 2, horizon, |n, x, a| {
        let (mode, temp) = space.decode(x).expect("state index in range");
        transition(&space, p, mode, temp, a as u8, drain.q[n - 1], drain.d_liters[n - 1])
    })
}

/// Cyclic ON/OFF rule: keep the current mode, `π_n(a|(m, θ)) = 1[a = m]`.
pub fn nominal_policy(space: &StateSpace, horizon: usize) -> PolicySequence {
    let nt = space.n_temps();
    PolicySequence::from_fn(space.len(), 2, horizon, |_, x| if x < nt { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        .expect("nominal rows are distributions")
}

/// Joint `μ(x, a) = ρ(x) 1[a = m]` for a state distribution `ρ`.
pub fn nominal_joint(space: &StateSpace, rho: &[f64]) -> Vec<f64> {
    let nt = space.n_temps();
    rho.iter()
        .enumerate()
        .flat_map(|(x, r)| if x < nt { [*r, 0.0] } else { [0.0, *r] })
        .collect()
}

/// Initial distribution for experiments: the fleet is spread uniformly over
/// the deadband in both modes and run under the nominal rule for
/// `warmup_days` passes of the kernel; the final state marginal is paired with
/// the nominal action.
pub fn nominal_initial_distribution(p: &HeaterParams, kernel: &TimedKernel, warmup_days: usize) -> Result<Vec<f64>> {
    let space = p.state_space();
    let band = (p.t_max - p.t_min + 1) as usize;
    let mut rho = vec![0.0; space.len()];
    for m in 0..2u8 {
        for t in p.t_min..=p.t_max {
            rho[space.encode(m, t)?] = 1.0 / (2 * band) as f64;
        }
    }
    let policy = nominal_policy(&space, kernel.horizon());
    for _ in 0..warmup_days {
        let mu = propagate(&nominal_joint(&space, &rho), &policy, kernel)?;
        rho = mu.marginal(kernel.horizon());
        let s: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|r| *r /= s);
    }
    Ok(nominal_joint(&space, &rho))
}
