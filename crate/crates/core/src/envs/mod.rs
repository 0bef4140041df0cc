//! Sparse-reward classic control tasks.
//!
//! Both tasks pay a reward of exactly one on the transition that reaches the
//! goal, terminate there, and pay zero everywhere else, including the
//! transition that hits the horizon.

pub mod acrobot;
pub mod mountain_car;

pub use acrobot::SparseAcrobot;
pub use mountain_car::SparseMountainCar;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub done: bool,
    pub steps_elapsed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "sparse-mountaincar")]
    SparseMountainCar,
    #[serde(rename = "sparse-acrobot")]
    SparseAcrobot,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::SparseMountainCar => "sparse-mountaincar",
            EnvKind::SparseAcrobot => "sparse-acrobot",
        }
    }

    /// `(observation dim, action dim)`.
    pub fn observation_spec(self) -> (usize, usize) {
        match self {
            EnvKind::SparseMountainCar => (2, 1),
            EnvKind::SparseAcrobot => (6, 1),
        }
    }

    pub fn default_horizon(self) -> usize {
        match self {
            EnvKind::SparseMountainCar => 1000,
            EnvKind::SparseAcrobot => 500,
        }
    }

    pub fn make(self, horizon: usize) -> Env {
        match self {
            EnvKind::SparseMountainCar => Env::MountainCar(SparseMountainCar::new(horizon)),
            EnvKind::SparseAcrobot => Env::Acrobot(SparseAcrobot::new(horizon)),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse-mountaincar" => Ok(EnvKind::SparseMountainCar),
            "sparse-acrobot" => Ok(EnvKind::SparseAcrobot),
            other => Err(Error::Config(format!(
                "unknown environment `{other}` (expected sparse-mountaincar or sparse-acrobot)"
            ))),
        }
    }
}

/// Uniform interface over the tasks.
pub trait Environment {
    fn kind(&self) -> EnvKind;

    /// Reseeds the start-state generator and begins a new episode.
    fn reset(&mut self, seed: u64) -> EnvState;

    /// Begins a new episode, continuing the current start-state stream.
    fn restart(&mut self) -> EnvState;

    /// Advances one step. Actions are clipped to `[-1, 1]`.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    fn observation_spec(&self) -> (usize, usize) {
        self.kind().observation_spec()
    }
}

/// Either task, dispatched statically.
#[derive(Debug, Clone)]
pub enum Env {
    MountainCar(SparseMountainCar),
    Acrobot(SparseAcrobot),
}

impl Environment for Env {
    fn kind(&self) -> EnvKind {
        match self {
            Env::MountainCar(e) => e.kind(),
            Env::Acrobot(e) => e.kind(),
        }
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        match self {
            Env::MountainCar(e) => e.reset(seed),
            Env::Acrobot(e) => e.reset(seed),
        }
    }

    fn restart(&mut self) -> EnvState {
        match self {
            Env::MountainCar(e) => e.restart(),
            Env::Acrobot(e) => e.restart(),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        match self {
            Env::MountainCar(e) => e.step(action),
            Env::Acrobot(e) => e.step(action),
        }
    }
}

pub(crate) fn start_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Validates a single-torque action and clips it to the unit interval.
pub(crate) fn clip_scalar_action(action: &[f64]) -> Result<f64> {
    match action {
        [a] if a.is_nan() => Err(Error::Numeric("action".into())),
        [a] => Ok(a.clamp(-1.0, 1.0)),
        _ => Err(Error::Config(format!("expected 1 action value, got {}", action.len()))),
    }
}
