use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Per-step withdrawal probability `q_n` and volume `d_n` (litres) drawn by a
/// heater that withdraws.
#[derive(Debug, Clone, PartialEq)]
pub struct DrainProfile {
    pub q: Vec<f64>,
    pub d_liters: Vec<f64>,
}

impl DrainProfile {
    pub fn new(q: Vec<f64>, d_liters: Vec<f64>) -> Result<Self> {
        if q.len() != d_liters.len() {
            return input_err(format!("{} probabilities for {} volumes", q.len(), d_liters.len()));
        }
        for (n, (&qn, &dn)) in q.iter().zip(&d_liters).enumerate() {
            check_row(n, qn, dn)?;
        }
        Ok(Self { q, d_liters })
    }

    /// No withdrawals over `horizon` steps.
    pub fn dry(horizon: usize) -> Self {
        Self { q: vec![0.0; horizon], d_liters: vec![0.0; horizon] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Expected litres drawn per heater over the profile.
    pub fn expected_volume(&self) -> f64 {
        self.q.iter().zip(&self.d_liters).map(|(q, d)| q * d).sum()
    }
}

fn check_row(step: usize, q: f64, d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return input_err(format!("drain row {step}: q = {q} outside [0,1]"));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return input_err(format!("drain row {step}: d_liters = {d} must be nonnegative"));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct DrainRow {
    step: usize,
    q: f64,
    d_liters: f64,
}

/// Reads a `step,q,d_liters` CSV with one row per step, steps in order from 0.
pub fn load_drain_profile(path: impl AsRef<Path>) -> Result<DrainProfile> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut q = Vec::new();
    let mut d = Vec::new();
    for (i, row) in reader.deserialize::<DrainRow>().enumerate() {
        let row = row.map_err(|e| crate::Error::Input(format!("drain row {i}: {e}")))?;
        if row.step != i {
            return input_err(format!("drain row {i}: expected step {i}, found {}", row.step));
        }
        check_row(i, row.q, row.d_liters)?;
        q.push(row.q);
        d.push(row.d_liters);
    }
    if q.is_empty() {
        return input_err(format!("drain profile {} has no rows", path.as_ref().display()));
    }
    Ok(DrainProfile { q, d_liters: d })
}

pub fn write_drain_profile(profile: &DrainProfile, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (step, (&q, &d_liters)) in profile.q.iter().zip(&profile.d_liters).enumerate() {
        w.serialize(DrainRow { step, q, d_liters })?;
    }
    w.flush()?;
    Ok(())
}

/// Shape of the synthetic daily withdrawal profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDrainConfig {
    pub steps_per_day: usize,
    /// Background withdrawal probability.
    pub base_q: f64,
    /// Extra probability at the morning peak (07:15).
    pub morning_peak: f64,
    /// Extra probability at the evening peak (20:00).
    pub evening_peak: f64,
    /// Mean volume of one withdrawal, litres.
    pub mean_liters: f64,
    /// Relative amplitude of the seeded multiplicative noise.
    pub noise: f64,
}

impl Default for SynthDrainConfig {
    fn default() -> Self {
        Self {
            steps_per_day: 144,
            base_q: 0.02,
            morning_peak: 0.25,
            evening_peak: 0.12,
            mean_liters: 15.0,
            noise: 0.1,
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    // circular distance on the 24 h clock
    let mut d = (hour - centre).abs() % 24.0;
    if d > 12.0 {
        d = 24.0 - d;
    }
    (-0.5 * (d / width).powi(2)).exp()
}

/// Two-peak daily profile, morning dominant, with seeded multiplicative noise.
pub fn synth_drain_profile(seed: u64, horizon: usize, cfg: &SynthDrainConfig) -> Result<DrainProfile> {
    if cfg.steps_per_day == 0 {
        return input_err("steps_per_day must be positive");
    }
    if !(0.0..1.0).contains(&cfg.noise) {
        return input_err(format!("noise {} outside [0, 1)", cfg.noise));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hours_per_step = 24.0 / cfg.steps_per_day as f64;
    let mut q = Vec::with_capacity(horizon);
    let mut d = Vec::with_capacity(horizon);
    for n in 0..horizon {
        let hour = (n % cfg.steps_per_day) as f64 * hours_per_step;
        let shape = cfg.base_q
            + cfg.morning_peak * bump(hour, 7.25, 0.75)
            + cfg.evening_peak * bump(hour, 20.0, 1.2);
        let jitter_q: f64 = rng.gen_range(-1.0..=1.0);
        let jitter_d: f64 = rng.gen_range(-1.0..=1.0);
        q.push((shape * (1.0 + cfg.noise * jitter_q)).clamp(0.0, 1.0));
        // larger draws around the morning showers
        let volume = cfg.mean_liters * (1.0 + 0.5 * bump(hour, 7.25, 1.0));
        d.push(volume * (1.0 + cfg.noise * jitter_d));
    }
    DrainProfile::new(q, d)
}
