use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heater::{load_drain_profile, HeaterParams, PhysicalSpec};
use crate::objective::DeviationSignal;
use crate::solvers::{FrankWolfeStep, InitPolicy, SolverConfig, SolverKind, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationKind {
    /// `+amplitude` for one hour from 05:00, balanced over the steps after it.
    OneHour,
    /// `+amplitude` from 11:00 to 19:00, balanced over 07:00-11:00 and 19:00-24:00.
    EightHour,
    /// Read from `deviation_file`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    FixedHorizon,
    Constant,
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Uniform,
    NominalDeviation,
}

/// The `solver_config` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub iterations: usize,
    pub schedule: ScheduleKind,
    /// Step constant `c`; `1 / L` when absent.
    pub step_constant: Option<f64>,
    pub init: InitKind,
    pub init_delta: f64,
    /// Constant Frank-Wolfe weight; `2 / (k + 3)` when absent.
    pub frank_wolfe_step: Option<f64>,
    pub seed: u64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            iterations: 100,
            schedule: ScheduleKind::FixedHorizon,
            step_constant: None,
            init: InitKind::Uniform,
            init_delta: 0.1,
            frank_wolfe_step: None,
            seed: 0,
        }
    }
}

fn default_t_min() -> i32 {
    50
}
fn default_t_max() -> i32 {
    65
}
fn default_t_amb() -> i32 {
    25
}
fn default_t_in() -> f64 {
    18.0
}
fn default_dt() -> f64 {
    10.0
}
fn default_warmup() -> usize {
    3
}
fn default_amplitude() -> f64 {
    0.10
}
fn default_fleet() -> usize {
    10_000
}
fn default_volume() -> f64 {
    PhysicalSpec::default().volume
}
fn default_height() -> f64 {
    PhysicalSpec::default().height
}
fn default_insulation_thickness() -> f64 {
    PhysicalSpec::default().insulation_thickness
}
fn default_insulation_conductivity() -> f64 {
    PhysicalSpec::default().insulation_conductivity
}
fn default_density() -> f64 {
    PhysicalSpec::default().water_density
}
fn default_heat_capacity() -> f64 {
    PhysicalSpec::default().water_heat_capacity
}
fn default_power() -> f64 {
    PhysicalSpec::default().rated_power
}

/// One experiment: heater model, drain, target, solver and fleet simulation.
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_volume")]
    pub volume: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_insulation_thickness")]
    pub insulation_thickness: f64,
    #[serde(default = "default_insulation_conductivity")]
    pub insulation_conductivity: f64,
    #[serde(default = "default_density")]
    pub water_density: f64,
    #[serde(default = "default_heat_capacity")]
    pub water_heat_capacity: f64,
    #[serde(default = "default_power")]
    pub rated_power: f64,

    #[serde(default = "default_t_min")]
    pub t_min: i32,
    #[serde(default = "default_t_max")]
    pub t_max: i32,
    #[serde(default = "default_t_amb")]
    pub t_amb: i32,
    #[serde(default = "default_t_in")]
    pub t_in: f64,
    #[serde(default = "default_dt")]
    pub dt_minutes: f64,
    pub horizon: usize,
    /// Days of nominal operation used to settle the initial distribution.
    #[serde(default = "default_warmup")]
    pub warmup_days: usize,

    #[serde(default)]
    pub drain_file: Option<PathBuf>,
    #[serde(default)]
    pub drain_seed: Option<u64>,

    pub deviation: DeviationKind,
    #[serde(default = "default_amplitude")]
    pub deviation_amplitude: f64,
    #[serde(default)]
    pub deviation_file: Option<PathBuf>,

    pub solver: SolverKind,
    #[serde(default)]
    pub solver_config: SolverBlock,

    /// Simulated heaters; 0 replaces the simulation by the mean-field flow.
    #[serde(default = "default_fleet")]
    pub fleet_size: usize,
    #[serde(default)]
    pub sim_seed: u64,
    pub output_dir: PathBuf,
    /// Write wall-clock times to `history.csv`. Off by default so reruns
    /// produce identical files.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.drain_file, &mut self.deviation_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn physical_spec(&self) -> PhysicalSpec {
        PhysicalSpec {
            volume: self.volume,
            height: self.height,
            insulation_thickness: self.insulation_thickness,
            insulation_conductivity: self.insulation_conductivity,
            water_density: self.water_density,
            water_heat_capacity: self.water_heat_capacity,
            rated_power: self.rated_power,
        }
    }

    pub fn heater_params(&self) -> Result<HeaterParams> {
        HeaterParams::from_spec(&self.physical_spec(), self.t_min, self.t_max, self.t_amb, self.t_in, self.dt_minutes)
    }

    /// Steps per day, when `dt_minutes` divides a day.
    pub fn steps_per_day(&self) -> Option<usize> {
        let spd = 1440.0 / self.dt_minutes;
        (spd.is_finite() && spd >= 1.0 && (spd - spd.round()).abs() < 1e-9).then(|| spd.round() as usize)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let b = &self.solver_config;
        let c = b
            .step_constant
            .unwrap_or_else(|| StepSchedule::default_for(self.horizon.max(1)).constant());
        let schedule = match b.schedule {
            ScheduleKind::FixedHorizon => StepSchedule::FixedHorizon(c),
            ScheduleKind::Constant => StepSchedule::Constant(c),
            ScheduleKind::Harmonic => StepSchedule::Harmonic(c),
        };
        let init = match b.init {
            InitKind::Uniform => InitPolicy::Uniform,
            InitKind::NominalDeviation => InitPolicy::NominalDeviation(b.init_delta),
        };
        let mut cfg = SolverConfig::new(b.iterations, schedule).with_init(init);
        cfg.frank_wolfe_step = b.frank_wolfe_step.map_or(FrankWolfeStep::Standard, FrankWolfeStep::Constant);
        cfg.seed = b.seed;
        cfg
    }

    /// Every violated invariant, without running anything.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.physical_spec().validate() {
            out.push(e.to_string());
        }
        if self.t_min >= self.t_max {
            out.push(format!("t_min ({}) must be below t_max ({})", self.t_min, self.t_max));
        }
        if self.t_amb >= self.t_min {
            out.push(format!("t_amb ({}) must be below t_min ({})", self.t_amb, self.t_min));
        }
        if !self.t_in.is_finite() {
            out.push("t_in must be finite".into());
        }
        if self.horizon == 0 {
            out.push("horizon must be positive".into());
        }
        match self.steps_per_day() {
            None => out.push(format!("dt_minutes ({}) must divide a day", self.dt_minutes)),
            Some(spd) => {
                if !self.horizon.is_multiple_of(spd) {
                    out.push(format!("horizon ({}) must span whole days of {spd} steps", self.horizon));
                }
            }
        }

        let drain_len = match (&self.drain_file, self.drain_seed) {
            (Some(_), Some(_)) => {
                out.push("give either drain_file or drain_seed, not both".into());
                None
            }
            (None, None) => {
                out.push("missing drain source: set drain_file or drain_seed".into());
                None
            }
            (Some(path), None) => match load_drain_profile(path) {
                Ok(p) => Some(p.len()),
                Err(e) => {
                    out.push(format!("drain_file {}: {e}", path.display()));
                    None
                }
            },
            (None, Some(_)) => None,
        };
        if let Some(len) = drain_len {
            if len != self.horizon {
                out.push(format!("drain_file has {len} steps, horizon is {}", self.horizon));
            }
        }

        if !(self.deviation_amplitude >= 0.0 && self.deviation_amplitude <= 1.0) {
            out.push(format!("deviation_amplitude {} outside [0, 1]", self.deviation_amplitude));
        }
        match self.deviation {
            DeviationKind::Custom => match &self.deviation_file {
                None => out.push("deviation custom needs deviation_file".into()),
                Some(path) => match load_deviation(path) {
                    Ok(v) => {
                        if v.len() != self.horizon {
                            out.push(format!("deviation_file has {} steps, horizon is {}", v.len(), self.horizon));
                        }
                        let energy: f64 = v.iter().sum();
                        if energy.abs() > 1e-9 {
                            out.push(format!("deviation_file has nonzero energy {energy:e}"));
                        }
                    }
                    Err(e) => out.push(format!("deviation_file {}: {e}", path.display())),
                },
            },
            _ => {
                if self.deviation_file.is_some() {
                    out.push("deviation_file is only read with deviation custom".into());
                }
                if let Some(spd) = self.steps_per_day() {
                    if self.horizon < spd {
                        out.push("built-in deviations need a horizon of at least one day".into());
                    }
                }
            }
        }

        let b = &self.solver_config;
        if let Some(c) = b.step_constant {
            if !(c > 0.0 && c.is_finite()) {
                out.push(format!("solver_config.step_constant must be positive, got {c}"));
            }
        }
        if b.init == InitKind::NominalDeviation && !(b.init_delta > 0.0 && b.init_delta <= 0.5) {
            out.push(format!("solver_config.init_delta {} outside (0, 0.5]", b.init_delta));
        }
        if let Some(eta) = b.frank_wolfe_step {
            if !(eta > 0.0 && eta <= 1.0) {
                out.push(format!("solver_config.frank_wolfe_step {eta} outside (0, 1]"));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push("output_dir is empty".into());
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct DeviationRow {
    step: usize,
    deviation: f64,
}

/// Reads a `step,deviation` CSV, steps in order from 0. The energy is not
/// checked here.
pub fn load_deviation(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut v = Vec::new();
    for (i, row) in reader.deserialize::<DeviationRow>().enumerate() {
        let row = row.map_err(|e| Error::Input(format!("deviation row {i}: {e}")))?;
        if row.step != i {
            return Err(Error::Input(format!("deviation row {i}: expected step {i}, found {}", row.step)));
        }
        if !row.deviation.is_finite() {
            return Err(Error::Input(format!("deviation row {i}: not finite")));
        }
        v.push(row.deviation);
    }
    if v.is_empty() {
        return Err(Error::Input("deviation file has no rows".into()));
    }
    Ok(v)
}

/// Builds the configured deviation for `horizon` steps of `steps_per_day`.
pub fn build_deviation(cfg: &ExperimentConfig, steps_per_day: usize) -> Result<DeviationSignal> {
    let at = |hours: f64| (hours * steps_per_day as f64 / 24.0).round() as usize;
    let amp = cfg.deviation_amplitude;
    match cfg.deviation {
        DeviationKind::OneHour => crate::objective::step_deviation(at(5.0), at(1.0).max(1), amp, cfg.horizon),
        DeviationKind::EightHour => {
            crate::objective::window_deviation(at(7.0), at(11.0), at(8.0).max(1), amp, cfg.horizon)
        }
        DeviationKind::Custom => {
            let path = cfg
                .deviation_file
                .as_ref()
                .ok_or_else(|| Error::Config("deviation custom needs deviation_file".into()))?;
            DeviationSignal::new(load_deviation(path)?)
        }
    }
}
