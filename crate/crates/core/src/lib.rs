//! Information-maximizing latent exploration.
//!
//! A PPO agent whose rewards are augmented with the information gain of a
//! Bayesian linear dynamics model. The model lives in the latent feature space
//! of the value network: the pre-activations of its final hidden layer.
//!
//! Module map:
//!
//! * [`nn`]: dense networks, reverse-mode gradients, Adam.
//! * [`envs`]: sparse-reward MountainCar and Acrobot.
//! * [`ppo`]: Gaussian policy, value network, GAE and the clipped update.
//! * [`bnn`]: diagonal Gaussians, the Bayesian linear model, information gain
//!   and value-distribution propagation. Also the raw-state Bayesian MLP used
//!   by the VIME baseline.
//! * [`pipeline`]: replay, normalizers, KL queue, bonus scoring and the
//!   training loop.
//! * [`analysis`]: numerical checks of the method's mathematical claims.
//! * [`cli`]: the `imle` command line.

pub mod analysis;
pub mod bnn;
pub mod cli;
pub mod config;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod ppo;
pub mod snapshot;

pub use error::{Error, Result};

/// Deterministic generator used everywhere randomness is consumed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the generator for `seed`.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
