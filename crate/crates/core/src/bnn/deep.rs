use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::nn::{Activation, Layer, Mlp, ParamTensor};
use crate::Rng;

use super::{add_prior_kl_grad, sigmoid, softplus, softplus_inverse, BayesianDynamics, BlockGrad};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianLayer {
    pub weight_mu: ParamTensor,
    pub weight_rho: ParamTensor,
    pub bias_mu: ParamTensor,
    pub bias_rho: ParamTensor,
    pub activation: Activation,
}

/// Bayesian MLP over raw `state ⊕ action` predicting the next state.
///
/// Used by the VIME baseline. Sampling one network per Monte-Carlo draw and
/// reusing the deterministic backward pass gives the reparameterised
/// gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianMlp {
    pub layers: Vec<BayesianLayer>,
    pub prior_std: f64,
    pub obs_std: f64,
    /// Monte-Carlo draws used for single-transition gradients.
    pub gradient_samples: usize,
}

struct SampledNet {
    net: Mlp,
    /// Standard-normal draws per layer: (weight, bias).
    eps: Vec<(Vec<f64>, Vec<f64>)>,
}

impl BayesianMlp {
    /// `sizes = [in, hidden.., out]`, tanh hidden units.
    pub fn new(sizes: &[usize], prior_std: f64, obs_std: f64, init_std: f64, gradient_samples: usize, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid Bayesian MLP sizes {sizes:?}")));
        }
        if !(prior_std > 0.0 && obs_std > 0.0 && init_std > 0.0) || gradient_samples == 0 {
            return Err(Error::Config("prior, noise, init std and sample count must be positive".into()));
        }
        let n = sizes.len() - 1;
        let rho = softplus_inverse(init_std);
        let layers = (0..n)
            .map(|i| {
                let (n_in, n_out) = (sizes[i], sizes[i + 1]);
                let scale = 1.0 / (n_in as f64).sqrt();
                let mut weight_mu = ParamTensor::zeros(format!("vime.{i}.weight_mu"), &[n_out, n_in]);
                for w in &mut weight_mu.values {
                    let z: f64 = StandardNormal.sample(rng);
                    *w = scale * z;
                }
                BayesianLayer {
                    weight_mu,
                    weight_rho: ParamTensor::filled(format!("vime.{i}.weight_rho"), &[n_out, n_in], rho),
                    bias_mu: ParamTensor::zeros(format!("vime.{i}.bias_mu"), &[n_out]),
                    bias_rho: ParamTensor::filled(format!("vime.{i}.bias_rho"), &[n_out], rho),
                    activation: if i + 1 == n { Activation::Identity } else { Activation::Tanh },
                }
            })
            .collect();
        Ok(Self {
            layers,
            prior_std,
            obs_std,
            gradient_samples,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weight_mu.shape[1]];
        s.extend(self.layers.iter().map(|l| l.weight_mu.shape[0]));
        s
    }

    fn mean_net(&self) -> Result<Mlp> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut layer = Layer::zeros(&format!("vime.{i}"), l.weight_mu.shape[1], l.weight_mu.shape[0], l.activation);
                layer.weight.values.copy_from_slice(&l.weight_mu.values);
                layer.bias.values.copy_from_slice(&l.bias_mu.values);
                layer
            })
            .collect();
        Mlp::from_layers(layers)
    }

    fn sample_net(&self, rng: &mut Rng) -> Result<SampledNet> {
        let mut eps = Vec::with_capacity(self.layers.len());
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let mut layer = Layer::zeros(&format!("vime.{i}"), l.weight_mu.shape[1], l.weight_mu.shape[0], l.activation);
            let ew: Vec<f64> = (0..l.weight_mu.len()).map(|_| StandardNormal.sample(rng)).collect();
            let eb: Vec<f64> = (0..l.bias_mu.len()).map(|_| StandardNormal.sample(rng)).collect();
            for k in 0..ew.len() {
                layer.weight.values[k] = l.weight_mu.values[k] + softplus(l.weight_rho.values[k]) * ew[k];
            }
            for k in 0..eb.len() {
                layer.bias.values[k] = l.bias_mu.values[k] + softplus(l.bias_rho.values[k]) * eb[k];
            }
            eps.push((ew, eb));
            layers.push(layer);
        }
        Ok(SampledNet {
            net: Mlp::from_layers(layers)?,
            eps,
        })
    }

    /// Runs `batch` through one sampled network, returning the summed
    /// negative log-likelihood (without constants) and leaving
    /// `d nll / d weights` in the sampled network's gradients.
    fn sampled_nll(&self, sampled: &mut SampledNet, batch: &[(&[f64], &[f64])]) -> Result<f64> {
        let inv_noise = 1.0 / (self.obs_std * self.obs_std);
        let mut nll = 0.0;
        for (x, y) in batch {
            let (pred, trace) = sampled.net.forward(x)?;
            let upstream: Vec<f64> = pred
                .iter()
                .zip(y.iter())
                .map(|(p, t)| {
                    let r = t - p;
                    nll += 0.5 * r * r * inv_noise;
                    -r * inv_noise
                })
                .collect();
            sampled.net.backward(trace, &upstream)?;
        }
        Ok(nll)
    }

    /// Maps sampled-weight gradients onto `(μ, ρ)` gradients.
    fn reparam_grads(&self, sampled: &SampledNet, scale: f64, out: &mut [BlockGrad]) {
        for (i, (l, (ew, eb))) in self.layers.iter().zip(&sampled.eps).enumerate() {
            let sl = &sampled.net.layers()[i];
            let (gw, gb) = out.split_at_mut(2 * i + 1);
            let gw = &mut gw[2 * i];
            let gb = &mut gb[0];
            for k in 0..ew.len() {
                let g = scale * sl.weight.grad[k];
                gw.mu[k] += g;
                gw.rho[k] += g * ew[k] * sigmoid(l.weight_rho.values[k]);
            }
            for k in 0..eb.len() {
                let g = scale * sl.bias.grad[k];
                gb.mu[k] += g;
                gb.rho[k] += g * eb[k] * sigmoid(l.bias_rho.values[k]);
            }
        }
    }

    fn empty_grads(&self) -> Vec<BlockGrad> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    BlockGrad {
                        mu: vec![0.0; l.weight_mu.len()],
                        rho: vec![0.0; l.weight_rho.len()],
                    },
                    BlockGrad {
                        mu: vec![0.0; l.bias_mu.len()],
                        rho: vec![0.0; l.bias_rho.len()],
                    },
                ]
            })
            .collect()
    }

    fn add_prior_grads(&self, scale: f64, grads: &mut [BlockGrad]) {
        for ((mu, rho), g) in self.posterior().into_iter().zip(grads.iter_mut()) {
            add_prior_kl_grad(&mu.values, &rho.values, self.prior_std, scale, &mut g.mu, &mut g.rho);
        }
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() || y.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "Bayesian MLP maps {} -> {}, got {} -> {}",
                self.input_dim(),
                self.output_dim(),
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }
}

impl BayesianDynamics for BayesianMlp {
    fn input_dim(&self) -> usize {
        self.layers[0].weight_mu.shape[1]
    }

    fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight_mu.shape[0]
    }

    fn posterior(&self) -> Vec<(&ParamTensor, &ParamTensor)> {
        self.layers
            .iter()
            .flat_map(|l| [(&l.weight_mu, &l.weight_rho), (&l.bias_mu, &l.bias_rho)])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight_mu, &mut l.weight_rho, &mut l.bias_mu, &mut l.bias_rho])
            .collect()
    }

    fn prior_std(&self) -> f64 {
        self.prior_std
    }

    fn elbo_loss(
        &mut self,
        batch: &[(Vec<f64>, Vec<f64>)],
        n_samples: usize,
        dataset_size: usize,
        rng: &mut Rng,
    ) -> Result<f64> {
        if batch.is_empty() || n_samples == 0 || dataset_size == 0 {
            return Err(Error::Usage("ELBO needs a nonempty batch, samples and dataset size".into()));
        }
        for (x, y) in batch {
            self.check_pair(x, y)?;
        }
        let pairs: Vec<(&[f64], &[f64])> = batch.iter().map(|(x, y)| (x.as_slice(), y.as_slice())).collect();
        let scale = 1.0 / (batch.len() * n_samples) as f64;
        let mut grads = self.empty_grads();
        let mut nll = 0.0;
        for _ in 0..n_samples {
            let mut sampled = self.sample_net(rng)?;
            nll += self.sampled_nll(&mut sampled, &pairs)?;
            self.reparam_grads(&sampled, scale, &mut grads);
        }
        let kl_scale = 1.0 / dataset_size as f64;
        self.add_prior_grads(kl_scale, &mut grads);
        let loss = nll * scale + self.output_dim() as f64 * (self.obs_std.ln() + HALF_LN_2PI) + kl_scale * self.kl_to_prior();

        let mut tensors = self.params_mut();
        for (k, g) in grads.into_iter().enumerate() {
            tensors[2 * k].grad = g.mu;
            tensors[2 * k + 1].grad = g.rho;
        }
        for t in &tensors {
            ensure_finite(&format!("ELBO gradient of {}", t.name), &t.grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("ELBO loss".into()));
        }
        Ok(loss)
    }

    fn transition_gradient(&self, x: &[f64], y: &[f64], dataset_size: usize, rng: &mut Rng) -> Result<Vec<BlockGrad>> {
        self.check_pair(x, y)?;
        if dataset_size == 0 {
            return Err(Error::Usage("dataset size must be positive".into()));
        }
        let scale = 1.0 / self.gradient_samples as f64;
        let mut grads = self.empty_grads();
        for _ in 0..self.gradient_samples {
            let mut sampled = self.sample_net(rng)?;
            self.sampled_nll(&mut sampled, &[(x, y)])?;
            self.reparam_grads(&sampled, scale, &mut grads);
        }
        self.add_prior_grads(1.0 / dataset_size as f64, &mut grads);
        Ok(grads)
    }

    fn predict_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mean_net()?.eval(x)
    }
}
