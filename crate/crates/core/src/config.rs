//! Run configuration: every effective hyperparameter of one training run.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain PPO; no intrinsic reward.
    Ppo,
    /// Bayesian MLP over raw states.
    Vime,
    /// Bayesian linear model over value-network latents.
    Imle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ppo => "ppo",
            Method::Vime => "vime",
            Method::Imle => "imle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Method::Ppo),
            "vime" => Ok(Method::Vime),
            "imle" => Ok(Method::Imle),
            other => Err(Error::Config(format!("unknown method `{other}` (expected ppo, vime or imle)"))),
        }
    }
}

/// Flat, serialisable run configuration. Missing JSON fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvKind,
    pub method: Method,
    pub seed: u64,
    pub total_steps: usize,
    pub epoch_steps: usize,
    /// Episode length cap; the task default when absent.
    pub horizon: Option<usize>,

    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_tau: f64,
    pub ppo_epochs: usize,
    pub ppo_batch_size: usize,
    pub ppo_clip: f64,
    pub entropy_coef: f64,
    /// Feed the agent running-normalised observations.
    pub normalize_observations: bool,
    /// Divide augmented rewards by the running std of the discounted return.
    pub scale_rewards: bool,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,

    pub eta: f64,
    pub bnn_updates: usize,
    pub bnn_samples: usize,
    pub bnn_batch_size: usize,
    pub bnn_update_interval: usize,
    pub min_replay: usize,
    pub kl_queue_len: usize,
    pub replay_capacity: usize,
    pub bnn_learning_rate: f64,
    /// Step size of the information-gain update; the BNN learning rate when absent.
    pub info_gain_step: Option<f64>,
    pub prior_std: f64,
    pub obs_noise_std: f64,
    pub bnn_init_std: f64,
    pub vime_hidden: Vec<usize>,

    /// Record the value-update error probe.
    pub probe: bool,
    pub probe_samples: usize,
    /// Write measured wall-clock time; otherwise the column is zero so that
    /// metrics files are reproducible byte for byte.
    pub record_wall_time: bool,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::SparseMountainCar,
            method: Method::Imle,
            seed: 0,
            total_steps: 250_000,
            epoch_steps: 2048,
            horizon: None,
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_tau: 0.95,
            ppo_epochs: 10,
            ppo_batch_size: 64,
            ppo_clip: 0.2,
            entropy_coef: 0.0,
            normalize_observations: true,
            scale_rewards: true,
            policy_hidden: vec![64, 64],
            value_hidden: vec![32, 32],
            eta: 1e-4,
            bnn_updates: 500,
            bnn_samples: 10,
            bnn_batch_size: 32,
            bnn_update_interval: 1,
            min_replay: 500,
            kl_queue_len: 10,
            replay_capacity: 100_000,
            bnn_learning_rate: 1e-3,
            info_gain_step: None,
            prior_std: 0.5,
            obs_noise_std: 0.1,
            bnn_init_std: 0.05,
            vime_hidden: vec![32, 32],
            probe: false,
            probe_samples: 256,
            record_wall_time: false,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn new(env: EnvKind, method: Method, seed: u64) -> Self {
        Self {
            env,
            method,
            seed,
            ..Self::default()
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or_else(|| self.env.default_horizon())
    }

    pub fn info_gain_step(&self) -> f64 {
        self.info_gain_step.unwrap_or(self.bnn_learning_rate)
    }

    pub fn epochs(&self) -> usize {
        self.total_steps.div_ceil(self.epoch_steps.max(1))
    }

    /// The intrinsic machinery only runs for a model-based method with η > 0;
    /// with η = 0 a run is exactly plain PPO.
    pub fn intrinsic_active(&self) -> bool {
        self.method != Method::Ppo && self.eta > 0.0
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            epochs: self.ppo_epochs,
            batch_size: self.ppo_batch_size,
            clip: self.ppo_clip,
            entropy_coef: self.entropy_coef,
            value_coef: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("total_steps", self.total_steps),
            ("epoch_steps", self.epoch_steps),
            ("ppo_epochs", self.ppo_epochs),
            ("ppo_batch_size", self.ppo_batch_size),
            ("bnn_samples", self.bnn_samples),
            ("bnn_batch_size", self.bnn_batch_size),
            ("bnn_update_interval", self.bnn_update_interval),
            ("kl_queue_len", self.kl_queue_len),
            ("replay_capacity", self.replay_capacity),
            ("horizon", self.horizon()),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(0.0..=1.0).contains(&self.gae_tau) {
            return Err(Error::Config("gamma must be in (0, 1] and gae_tau in [0, 1]".into()));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::Config("eta must be a finite nonnegative number".into()));
        }
        let stds = [self.prior_std, self.obs_noise_std, self.bnn_init_std, self.info_gain_step()];
        if stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("prior/noise/init std and info-gain step must be positive".into()));
        }
        if self.value_hidden.is_empty() {
            return Err(Error::Config("value network needs a hidden layer for latent features".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
