//! Mean-field control of a population of thermostatically controlled water
//! heaters.
//!
//! The population is a finite-horizon MDP over `(mode, temperature)` states.
//! Policies are optimized so that the fleet's average consumption tracks a
//! target signal, using mirror descent on state-action distributions
//! ([`solvers::md_mfc`]) or one of three mean-field-game baselines. A
//! Monte-Carlo simulator ([`popsim`]) checks the mean-field predictions on a
//! finite fleet.

pub mod bregman;
mod error;
pub mod experiment;
pub mod heater;
pub mod mdp;
pub mod objective;
pub mod popsim;
pub mod solvers;

pub use error::{Error, Result};
