//! Proximal policy optimisation with generalised advantage estimation.

mod buffer;
mod gae;
mod update;

pub use buffer::{collect_epoch, EnvRunner, RolloutBuffer, OBS_CLIP};
pub use gae::gae;
pub use update::{normalize_advantages, ppo_update, sample_loss, PpoConfig, SampleLoss, UpdateStats};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, ParamTensor};
use crate::Rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian policy with a state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: ParamTensor,
}

impl GaussianPolicy {
    /// `obs -> 64 -> 64 -> action` with tanh hidden units, output gain 0.01
    /// and `log_std = 0`.
    pub fn new(obs_dim: usize, action_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::with_hidden(obs_dim, action_dim, &[64, 64], rng)
    }

    pub fn with_hidden(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Ok(Self {
            mean_net: Mlp::orthogonal("policy", &sizes, Activation::Tanh, 1.0, 0.01, rng)?,
            log_std: ParamTensor::zeros("policy.log_std", &[action_dim]),
        })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.eval(obs)
    }

    /// Samples an action and returns it with its exact log density. The
    /// sample is unclipped; environments clip on their side.
    pub fn act(&self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std.values)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        let log_prob = gaussian_log_prob(&mean, &self.log_std.values, &action);
        Ok((action, log_prob))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::Config(format!(
                "policy has {} action dims, got {}",
                self.action_dim(),
                action.len()
            )));
        }
        let mean = self.mean(obs)?;
        Ok(gaussian_log_prob(&mean, &self.log_std.values, action))
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.mean_net.params();
        p.push(&self.log_std);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.mean_net.params_mut();
        p.push(&mut self.log_std);
        p
    }

    pub fn zero_grad(&mut self) {
        self.mean_net.zero_grad();
        self.log_std.zero_grad();
    }
}

/// Log density of `x` under `N(mean, diag(exp(log_std))^2)`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), xi)| {
            let z = (xi - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// State-value network `obs -> 32 -> 32 -> 1`; the final layer stays affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub net: Mlp,
}

impl ValueNet {
    pub fn new(obs_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::with_hidden(obs_dim, &[32, 32], rng)
    }

    pub fn with_hidden(obs_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Self {
            net: Mlp::orthogonal("value", &sizes, Activation::Tanh, 1.0, 1.0, rng)?,
        })
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.eval(obs)?[0])
    }

    pub fn latent(&self, obs: &[f64]) -> Result<Vec<f64>> {
        crate::nn::latent_features(&self.net, obs)
    }

    pub fn latent_dim(&self) -> usize {
        let layers = self.net.layers();
        layers[layers.len() - 1].input_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn log_prob_at_mean() {
        let mean = [0.3, -1.0];
        let log_std = [0.2, -0.5];
        let lp = gaussian_log_prob(&mean, &log_std, &mean);
        let expected: f64 = log_std.iter().map(|ls| -(ls + 0.5 * (2.0 * std::f64::consts::PI).ln())).sum();
        assert!((lp - expected).abs() < 1e-14);
    }

    #[test]
    fn vanishing_std_returns_mean() {
        let mut rng = seeded_rng(0);
        let mut policy = GaussianPolicy::new(2, 1, &mut rng).unwrap();
        policy.log_std.values[0] = -60.0;
        let obs = [0.1, 0.2];
        let (a, _) = policy.act(&obs, &mut rng).unwrap();
        assert!((a[0] - policy.mean(&obs).unwrap()[0]).abs() < 1e-20);
    }

    #[test]
    fn same_rng_same_action() {
        let mut init = seeded_rng(1);
        let policy = GaussianPolicy::new(6, 1, &mut init).unwrap();
        let obs = [0.0, 1.0, 0.5, -0.5, 0.1, 0.2];
        let a = policy.act(&obs, &mut seeded_rng(9)).unwrap();
        let b = policy.act(&obs, &mut seeded_rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_latent_width_is_32() {
        let v = ValueNet::new(2, &mut seeded_rng(0)).unwrap();
        assert_eq!(v.latent_dim(), 32);
        assert_eq!(v.latent(&[0.0, 0.0]).unwrap().len(), 32);
        let last = v.net.layers().last().unwrap();
        assert_eq!(last.activation, Activation::Identity);
    }
}
