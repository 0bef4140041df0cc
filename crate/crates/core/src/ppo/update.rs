use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::Rng;

use super::{gaussian_log_prob, GaussianPolicy, RolloutBuffer, ValueNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            clip: 0.2,
            entropy_coef: 0.0,
            value_coef: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Mean of `log π_old - log π_new` over the buffer after the update.
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Per-sample loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    /// `-min(ρA, clip(ρ)A)`
    pub policy: f64,
    /// `½ (V - R)²`
    pub value: f64,
    pub ratio: f64,
    pub clipped: bool,
}

impl SampleLoss {
    pub fn total(&self, cfg: &PpoConfig, entropy: f64) -> f64 {
        self.policy + cfg.value_coef * self.value - cfg.entropy_coef * entropy
    }
}

/// Zero mean, unit (population) standard deviation.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Evaluates the clipped-surrogate and value loss for one sample and
/// accumulates `weight`-scaled gradients into both networks.
#[allow(clippy::too_many_arguments)]
pub fn sample_loss(
    policy: &mut GaussianPolicy,
    value: &mut ValueNet,
    obs: &[f64],
    action: &[f64],
    old_log_prob: f64,
    advantage: f64,
    target: f64,
    cfg: &PpoConfig,
    weight: f64,
) -> Result<SampleLoss> {
    let (mean, trace) = policy.mean_net.forward(obs)?;
    let log_std = policy.log_std.values.clone();
    let log_prob = gaussian_log_prob(&mean, &log_std, action);
    let ratio = (log_prob - old_log_prob).exp();
    let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
    let unclipped_term = ratio * advantage;
    let clipped_term = clipped_ratio * advantage;
    let (surrogate, clipped) = if unclipped_term <= clipped_term {
        (unclipped_term, false)
    } else {
        (clipped_term, true)
    };

    // d(-surrogate)/d(log π); the clipped branch is flat in the parameters.
    let d_log_prob = if clipped { 0.0 } else { -advantage * ratio };
    let mut upstream = vec![0.0; mean.len()];
    for i in 0..mean.len() {
        let sigma = log_std[i].exp();
        let z = (action[i] - mean[i]) / sigma;
        upstream[i] = weight * d_log_prob * z / sigma;
        let d_entropy = -cfg.entropy_coef;
        policy.log_std.grad[i] += weight * (d_log_prob * (z * z - 1.0) + d_entropy);
    }
    policy.mean_net.backward(trace, &upstream)?;

    let (v, vtrace) = value.net.forward(obs)?;
    let err = v[0] - target;
    value.net.backward(vtrace, &[weight * cfg.value_coef * err])?;

    let loss = SampleLoss {
        policy: -surrogate,
        value: 0.5 * err * err,
        ratio,
        clipped,
    };
    if !loss.policy.is_finite() || !loss.value.is_finite() {
        return Err(Error::Numeric(format!(
            "ppo loss (policy {}, value {}, ratio {ratio})",
            loss.policy, loss.value
        )));
    }
    Ok(loss)
}

/// Runs `cfg.epochs` shuffled passes of minibatch Adam steps over a finished
/// buffer. Advantages are normalised per minibatch.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value: &mut ValueNet,
    policy_opt: &mut Adam,
    value_opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    if !buffer.is_finished() {
        return Err(Error::Usage("buffer has no advantages; call finish() first".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("ppo epochs and batch size must be positive".into()));
    }
    let n = buffer.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut policy_sum = 0.0;
    let mut value_sum = 0.0;
    let mut clipped = 0usize;
    let mut count = 0usize;

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let raw: Vec<f64> = batch.iter().map(|&i| buffer.advantages[i]).collect();
            let adv = normalize_advantages(&raw);
            let weight = 1.0 / batch.len() as f64;
            policy.zero_grad();
            value.net.zero_grad();
            for (k, &i) in batch.iter().enumerate() {
                let l = sample_loss(
                    policy,
                    value,
                    &buffer.observations[i],
                    &buffer.actions[i],
                    buffer.log_probs[i],
                    adv[k],
                    buffer.returns[i],
                    cfg,
                    weight,
                )?;
                policy_sum += l.policy;
                value_sum += l.value;
                clipped += l.clipped as usize;
                count += 1;
            }
            policy_opt.step(&mut policy.params_mut())?;
            value_opt.step(&mut value.net.params_mut())?;
        }
    }

    let mut kl = 0.0;
    for i in 0..n {
        kl += buffer.log_probs[i] - policy.log_prob(&buffer.observations[i], &buffer.actions[i])?;
    }
    Ok(UpdateStats {
        policy_loss: policy_sum / count as f64,
        value_loss: value_sum / count as f64,
        approx_kl: kl / n as f64,
        clip_fraction: clipped as f64 / count as f64,
    })
}
