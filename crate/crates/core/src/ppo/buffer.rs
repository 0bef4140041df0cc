use crate::envs::{Env, Environment};
use crate::error::{Error, Result};
use crate::pipeline::RunningNormalizer;
use crate::Rng;

use super::{gae, GaussianPolicy, ValueNet};

/// One epoch of on-policy experience.
///
/// `actions` holds the unclipped policy samples (their log densities are in
/// `log_probs`); `env_actions` holds what the environment actually applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub env_actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub intrinsic: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub next_observations: Vec<Vec<f64>>,
    pub last_value: f64,
    /// Undiscounted extrinsic return of every episode that ended this epoch.
    pub episode_returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Extrinsic plus intrinsic reward per step.
    pub fn augmented_rewards(&self) -> Vec<f64> {
        self.rewards
            .iter()
            .zip(&self.intrinsic)
            .map(|(r, b)| r + b)
            .collect()
    }

    /// Computes advantages and returns on the augmented rewards.
    pub fn finish(&mut self, gamma: f64, tau: f64) -> Result<()> {
        let rewards = self.augmented_rewards();
        self.finish_with(&rewards, gamma, tau)
    }

    /// Computes advantages and returns on caller-supplied per-step rewards.
    pub fn finish_with(&mut self, rewards: &[f64], gamma: f64, tau: f64) -> Result<()> {
        if rewards.len() != self.len() {
            return Err(Error::Config(format!("{} rewards for {} steps", rewards.len(), self.len())));
        }
        let (adv, ret) = gae(rewards, &self.values, &self.dones, self.last_value, gamma, tau)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        !self.is_empty() && self.advantages.len() == self.len()
    }
}

/// Largest magnitude of a normalised observation coordinate.
pub const OBS_CLIP: f64 = 10.0;

/// An environment plus the episode in progress, carried across epochs.
///
/// With observation normalisation the agent only ever sees
/// `clip((s - mean) / std)` under running statistics of the raw states.
#[derive(Debug, Clone)]
pub struct EnvRunner {
    pub env: Env,
    /// Raw observation of the current state.
    pub obs: Vec<f64>,
    pub episode_return: f64,
    pub obs_norm: Option<RunningNormalizer>,
}

impl EnvRunner {
    pub fn new(mut env: Env, seed: u64) -> Self {
        let obs = env.reset(seed).observation;
        Self {
            env,
            obs,
            episode_return: 0.0,
            obs_norm: None,
        }
    }

    pub fn with_obs_normalization(mut self) -> Self {
        self.obs_norm = Some(RunningNormalizer::new(self.obs.len()));
        self
    }

    /// What the agent sees of a raw observation under the current statistics.
    pub fn present(&self, raw: &[f64]) -> Vec<f64> {
        match &self.obs_norm {
            Some(norm) => norm.normalize(raw).into_iter().map(|v| v.clamp(-OBS_CLIP, OBS_CLIP)).collect(),
            None => raw.to_vec(),
        }
    }

    fn observe(&mut self, raw: &[f64]) -> Vec<f64> {
        if let Some(norm) = self.obs_norm.as_mut() {
            norm.update(raw);
        }
        self.present(raw)
    }
}

/// Gathers exactly `epoch_steps` transitions, restarting episodes as they end.
pub fn collect_epoch(
    runner: &mut EnvRunner,
    policy: &GaussianPolicy,
    value: &ValueNet,
    epoch_steps: usize,
    rng: &mut Rng,
) -> Result<RolloutBuffer> {
    if epoch_steps == 0 {
        return Err(Error::Config("epoch_steps must be positive".into()));
    }
    let mut buf = RolloutBuffer::default();
    for _ in 0..epoch_steps {
        let raw = std::mem::take(&mut runner.obs);
        let obs = runner.observe(&raw);
        let v = value.value(&obs)?;
        let (action, log_prob) = policy.act(&obs, rng)?;
        let env_action: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let step = runner.env.step(&env_action)?;
        runner.episode_return += step.reward;

        buf.observations.push(obs);
        buf.actions.push(action);
        buf.env_actions.push(env_action);
        buf.log_probs.push(log_prob);
        buf.rewards.push(step.reward);
        buf.intrinsic.push(0.0);
        buf.values.push(v);
        buf.dones.push(step.done);
        buf.next_observations.push(runner.present(&step.observation));

        if step.done {
            buf.episode_returns.push(runner.episode_return);
            runner.episode_return = 0.0;
            runner.obs = runner.env.restart().observation;
        } else {
            runner.obs = step.observation;
        }
    }
    buf.last_value = value.value(&runner.present(&runner.obs))?;
    Ok(buf)
}
