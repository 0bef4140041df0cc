//! Bayesian dynamics models with fully factored Gaussian posteriors.
//!
//! Every scalar parameter `w` carries its own `N(μ, σ²)` posterior with
//! `σ = softplus(ρ)`. Both the latent linear model ([`BayesianLinearModel`])
//! and the raw-state network of the VIME baseline ([`BayesianMlp`]) expose
//! their posteriors as aligned `(μ, ρ)` tensor pairs, which lets the
//! information-gain computation be shared.

mod deep;
mod gaussian;
mod linear;
mod value;

pub use deep::BayesianMlp;
pub use gaussian::{kl_diag_gauss, kl_scalar, sigmoid, softplus, softplus_inverse, DiagGaussian};
pub use linear::BayesianLinearModel;
pub use value::{value_distribution, ValueHead};

use crate::error::{Error, Result};
use crate::nn::{Adam, ParamTensor};
use crate::pipeline::{ReplayMemory, Transition};
use crate::Rng;

/// Lower bound applied to diagonal Hessian entries before inversion.
pub const HESSIAN_FLOOR: f64 = 1e-8;

/// Gradient of a scalar objective with respect to one `(μ, ρ)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrad {
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Common surface of the Bayesian dynamics models.
pub trait BayesianDynamics {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Posterior blocks as `(μ, ρ)` pairs.
    fn posterior(&self) -> Vec<(&ParamTensor, &ParamTensor)>;

    /// All posterior tensors in a fixed order, for the optimiser.
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn prior_std(&self) -> f64;

    /// Minibatch negative ELBO: the average sampled negative log-likelihood
    /// plus `KL(q ‖ prior) / dataset_size`. Gradients are written into the
    /// `grad` field of every posterior tensor.
    fn elbo_loss(
        &mut self,
        batch: &[(Vec<f64>, Vec<f64>)],
        n_samples: usize,
        dataset_size: usize,
        rng: &mut Rng,
    ) -> Result<f64>;

    /// Gradient of the single-transition objective
    /// `E_q[-log p(y | x, w)] + KL(q ‖ prior) / dataset_size`, aligned with
    /// [`BayesianDynamics::posterior`].
    fn transition_gradient(
        &self,
        x: &[f64],
        y: &[f64],
        dataset_size: usize,
        rng: &mut Rng,
    ) -> Result<Vec<BlockGrad>>;

    /// Predictive mean at the posterior mean parameters.
    fn predict_mean(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Information gain of one transition, `KL(q(θ') ‖ q(θ))`, where `θ'` is
    /// reached from `θ` by one diagonally preconditioned step of size `step`.
    /// The model is not modified.
    fn info_gain_exact(
        &self,
        x: &[f64],
        y: &[f64],
        step: f64,
        dataset_size: usize,
        rng: &mut Rng,
    ) -> Result<f64> {
        let grads = self.transition_gradient(x, y, dataset_size, rng)?;
        Ok(step_kl(&self.posterior(), &grads, step)?.0)
    }

    /// Second-order estimate `½ λ² ∇ᵀ H⁻¹ ∇` of [`Self::info_gain_exact`].
    fn info_gain_approx(
        &self,
        x: &[f64],
        y: &[f64],
        step: f64,
        dataset_size: usize,
        rng: &mut Rng,
    ) -> Result<ApproxInfoGain> {
        let grads = self.transition_gradient(x, y, dataset_size, rng)?;
        quadratic_form(&self.posterior(), &grads, step)
    }

    /// Parameter-space `KL(q ‖ prior)`.
    fn kl_to_prior(&self) -> f64 {
        let prior = self.prior_std();
        self.posterior()
            .into_iter()
            .flat_map(|(mu, rho)| mu.values.iter().zip(&rho.values))
            .map(|(m, r)| kl_scalar(*m, softplus(*r), 0.0, prior))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxInfoGain {
    pub value: f64,
    /// Some Hessian entry was below [`HESSIAN_FLOOR`] and was clamped.
    pub clamped: bool,
}

/// Diagonal Hessian of `θ' ↦ KL(q(θ') ‖ q(θ))` at `θ' = θ`: `1/σ²` for a
/// mean and `2 sigmoid(ρ)² / σ²` for a softplus-std parameter.
#[inline]
fn hessian_entries(rho: f64) -> (f64, f64) {
    let sigma = softplus(rho);
    let s = sigmoid(rho);
    let inv_var = 1.0 / (sigma * sigma);
    (inv_var, 2.0 * s * s * inv_var)
}

fn check_alignment(posterior: &[(&ParamTensor, &ParamTensor)], grads: &[BlockGrad]) -> Result<()> {
    if posterior.len() != grads.len()
        || posterior
            .iter()
            .zip(grads)
            .any(|((m, r), g)| g.mu.len() != m.len() || g.rho.len() != r.len())
    {
        return Err(Error::Config("gradient does not match the posterior layout".into()));
    }
    for ((mu, _), g) in posterior.iter().zip(grads) {
        if g.mu.iter().chain(&g.rho).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("information-gain gradient of {}", mu.name)));
        }
    }
    Ok(())
}

/// One scalar `(μ, ρ)` pair moved by `-λ H⁻¹ g`; the flag reports clamping.
pub fn preconditioned_step(mu: f64, rho: f64, g_mu: f64, g_rho: f64, step: f64) -> (f64, f64, bool) {
    let (h_mu, h_rho) = hessian_entries(rho);
    let clamped = h_mu < HESSIAN_FLOOR || h_rho < HESSIAN_FLOOR;
    (
        mu - step * g_mu / h_mu.max(HESSIAN_FLOOR),
        rho - step * g_rho / h_rho.max(HESSIAN_FLOOR),
        clamped,
    )
}

/// Takes the preconditioned step `θ' = θ - λ H⁻¹ ∇` and returns
/// `(KL(q(θ') ‖ q(θ)), clamped)`.
pub fn step_kl(posterior: &[(&ParamTensor, &ParamTensor)], grads: &[BlockGrad], step: f64) -> Result<(f64, bool)> {
    check_alignment(posterior, grads)?;
    let mut kl = 0.0;
    let mut clamped = false;
    for ((mu, rho), g) in posterior.iter().zip(grads) {
        for i in 0..mu.len() {
            let (new_mu, new_rho, c) = preconditioned_step(mu.values[i], rho.values[i], g.mu[i], g.rho[i], step);
            clamped |= c;
            kl += kl_scalar(new_mu, softplus(new_rho), mu.values[i], softplus(rho.values[i]));
        }
    }
    if !kl.is_finite() {
        return Err(Error::Numeric("information gain".into()));
    }
    Ok((kl.max(0.0), clamped))
}

/// `½ λ² Σ g² / h` over every posterior parameter.
pub fn quadratic_form(posterior: &[(&ParamTensor, &ParamTensor)], grads: &[BlockGrad], step: f64) -> Result<ApproxInfoGain> {
    check_alignment(posterior, grads)?;
    let mut total = 0.0;
    let mut clamped = false;
    for ((mu, rho), g) in posterior.iter().zip(grads) {
        for i in 0..mu.len() {
            let (h_mu, h_rho) = hessian_entries(rho.values[i]);
            clamped |= h_mu < HESSIAN_FLOOR || h_rho < HESSIAN_FLOOR;
            total += g.mu[i] * g.mu[i] / h_mu.max(HESSIAN_FLOOR) + g.rho[i] * g.rho[i] / h_rho.max(HESSIAN_FLOOR);
        }
    }
    Ok(ApproxInfoGain {
        value: 0.5 * step * step * total,
        clamped,
    })
}

/// Adds the gradient of `KL(q ‖ N(0, prior²)) * scale` to one block.
pub(crate) fn add_prior_kl_grad(mu: &[f64], rho: &[f64], prior_std: f64, scale: f64, g_mu: &mut [f64], g_rho: &mut [f64]) {
    let prior_var = prior_std * prior_std;
    for i in 0..mu.len() {
        let sigma = softplus(rho[i]);
        g_mu[i] += scale * mu[i] / prior_var;
        g_rho[i] += scale * (sigma / prior_var - 1.0 / sigma) * sigmoid(rho[i]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub updates: usize,
    pub batch_size: usize,
    pub n_samples: usize,
    pub min_replay: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            updates: 500,
            batch_size: 32,
            n_samples: 10,
            min_replay: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Skipped { replay_len: usize },
    Trained { first_loss: f64, last_loss: f64, mean_loss: f64 },
}

/// Runs `updates` Adam steps on the ELBO over fresh replay minibatches.
///
/// `project` maps a stored transition to `(input, target)` at call time, so
/// latent targets always come from the current feature map and never from
/// values cached at collection time.
pub fn fit<M, P>(
    model: &mut M,
    replay: &ReplayMemory,
    project: P,
    opts: &FitOptions,
    adam: &mut Adam,
    rng: &mut Rng,
) -> Result<FitOutcome>
where
    M: BayesianDynamics + ?Sized,
    P: Fn(&Transition) -> Result<(Vec<f64>, Vec<f64>)>,
{
    if replay.len() < opts.min_replay || replay.is_empty() {
        return Ok(FitOutcome::Skipped {
            replay_len: replay.len(),
        });
    }
    if opts.batch_size == 0 || opts.n_samples == 0 {
        return Err(Error::Config("BNN batch size and sample count must be positive".into()));
    }
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    let mut sum = 0.0;
    for u in 0..opts.updates {
        let batch = replay
            .sample(opts.batch_size, rng)
            .into_iter()
            .map(&project)
            .collect::<Result<Vec<_>>>()?;
        let loss = model.elbo_loss(&batch, opts.n_samples, replay.len(), rng)?;
        adam.step(&mut model.params_mut())?;
        if u == 0 {
            first = loss;
        }
        last = loss;
        sum += loss;
    }
    Ok(FitOutcome::Trained {
        first_loss: first,
        last_loss: last,
        mean_loss: if opts.updates == 0 { f64::NAN } else { sum / opts.updates as f64 },
    })
}
