//! The exploration pipeline: replay, feature projection, information-gain
//! bonuses and the training loop that alternates PPO and model fits.

mod kl_queue;
mod normalizer;
mod replay;
mod return_scale;
mod scoring;
mod trainer;

pub use kl_queue::KlQueue;
pub use normalizer::{RunningNormalizer, STD_FLOOR};
pub use replay::{ReplayMemory, Transition};
pub use return_scale::{ReturnScaler, REWARD_CLIP};
pub use scoring::{score_epoch, ScoreStats};
pub use trainer::{run_training, RunSummary, Trainer};

use crate::bnn::{BayesianDynamics, BayesianLinearModel, BayesianMlp};
use crate::error::{Error, Result};
use crate::ppo::ValueNet;

/// How a stored transition becomes the dynamics model's `(input, target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Normalised value-network latents.
    Latent,
    /// Normalised raw states.
    Raw,
}

/// A feature map bound to the networks and statistics of the moment.
#[derive(Debug, Clone, Copy)]
pub struct Projection<'a> {
    pub kind: FeatureKind,
    pub value: &'a ValueNet,
    pub normalizer: &'a RunningNormalizer,
}

impl Projection<'_> {
    /// Un-normalised features of one state: what the normaliser observes.
    pub fn features(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            FeatureKind::Latent => self.value.latent(state),
            FeatureKind::Raw => Ok(state.to_vec()),
        }
    }

    pub fn encode(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.normalizer.normalize(&self.features(state)?))
    }

    /// `(φ(s) ⊕ a, φ(s'))`. The normaliser is read, never updated.
    pub fn pair(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = self.encode(s)?;
        x.extend_from_slice(a);
        Ok((x, self.encode(s_next)?))
    }

    pub fn transition(&self, t: &Transition) -> Result<(Vec<f64>, Vec<f64>)> {
        self.pair(&t.s, &t.a, &t.s_next)
    }
}

/// The Bayesian model of either exploration method.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsModel {
    Latent(BayesianLinearModel),
    Raw(BayesianMlp),
}

impl DynamicsModel {
    pub fn feature_kind(&self) -> FeatureKind {
        match self {
            DynamicsModel::Latent(_) => FeatureKind::Latent,
            DynamicsModel::Raw(_) => FeatureKind::Raw,
        }
    }

    pub fn model(&self) -> &dyn BayesianDynamics {
        match self {
            DynamicsModel::Latent(m) => m,
            DynamicsModel::Raw(m) => m,
        }
    }

    pub fn model_mut(&mut self) -> &mut dyn BayesianDynamics {
        match self {
            DynamicsModel::Latent(m) => m,
            DynamicsModel::Raw(m) => m,
        }
    }

    /// One-step mean-prediction MSE over `transitions`, averaged over
    /// coordinates.
    pub fn prediction_mse(&self, projection: &Projection<'_>, transitions: &[&Transition]) -> Result<f64> {
        if transitions.is_empty() {
            return Err(Error::Usage("no transitions to evaluate".into()));
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in transitions {
            let (x, y) = projection.transition(t)?;
            let pred = self.model().predict_mean(&x)?;
            sum += pred.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
            count += y.len();
        }
        Ok(sum / count as f64)
    }
}
