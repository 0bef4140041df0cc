use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::nn::ParamTensor;
use crate::Rng;

use super::{add_prior_kl_grad, sigmoid, softplus, softplus_inverse, BayesianDynamics, BlockGrad, DiagGaussian};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Linear map `y = W x + b + ε` with a fully factored Gaussian posterior over
/// every entry of `W` and `b`, and fixed observation noise `ε ~ N(0, σ_obs²)`.
///
/// In the latent setting `x = latent ⊕ action` and `y` is the next latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianLinearModel {
    pub weight_mu: ParamTensor,
    pub weight_rho: ParamTensor,
    pub bias_mu: ParamTensor,
    pub bias_rho: ParamTensor,
    pub prior_std: f64,
    pub obs_std: f64,
}

impl BayesianLinearModel {
    /// Posterior means drawn from `N(0, init_std²)`, posterior stds equal to
    /// `init_std`.
    pub fn new(in_dim: usize, out_dim: usize, prior_std: f64, obs_std: f64, init_std: f64, rng: &mut Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("linear model dims must be positive".into()));
        }
        if !(prior_std > 0.0 && obs_std > 0.0 && init_std > 0.0) {
            return Err(Error::Config("prior, noise and init std must be positive".into()));
        }
        let mut weight_mu = ParamTensor::zeros("bnn.weight_mu", &[out_dim, in_dim]);
        for w in &mut weight_mu.values {
            let z: f64 = StandardNormal.sample(rng);
            *w = init_std * z;
        }
        let rho = softplus_inverse(init_std);
        Ok(Self {
            weight_mu,
            weight_rho: ParamTensor::filled("bnn.weight_rho", &[out_dim, in_dim], rho),
            bias_mu: ParamTensor::zeros("bnn.bias_mu", &[out_dim]),
            bias_rho: ParamTensor::filled("bnn.bias_rho", &[out_dim], rho),
            prior_std,
            obs_std,
        })
    }

    /// Builds a model from explicit posterior means and standard deviations.
    pub fn from_moments(
        weight_mean: Vec<f64>,
        weight_std: Vec<f64>,
        bias_mean: Vec<f64>,
        bias_std: Vec<f64>,
        prior_std: f64,
        obs_std: f64,
    ) -> Result<Self> {
        let out_dim = bias_mean.len();
        if out_dim == 0 || weight_mean.len() % out_dim != 0 || weight_mean.is_empty() {
            return Err(Error::Config("weight length must be a positive multiple of the bias length".into()));
        }
        let in_dim = weight_mean.len() / out_dim;
        if weight_std.iter().chain(&bias_std).any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain("posterior std must be positive".into()));
        }
        let to_rho = |v: Vec<f64>| v.into_iter().map(softplus_inverse).collect::<Vec<_>>();
        Ok(Self {
            weight_mu: ParamTensor::from_values("bnn.weight_mu", &[out_dim, in_dim], weight_mean)?,
            weight_rho: ParamTensor::from_values("bnn.weight_rho", &[out_dim, in_dim], to_rho(weight_std))?,
            bias_mu: ParamTensor::from_values("bnn.bias_mu", &[out_dim], bias_mean)?,
            bias_rho: ParamTensor::from_values("bnn.bias_rho", &[out_dim], to_rho(bias_std))?,
            prior_std,
            obs_std,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight_mu.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight_mu.shape[0]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::Config(format!(
                "linear model expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Exact moments of `W x + b` under the posterior, excluding observation noise.
    pub fn predict_parametric(&self, x: &[f64]) -> Result<DiagGaussian> {
        self.check_input(x)?;
        let n_in = self.in_dim();
        let mut mean = Vec::with_capacity(self.out_dim());
        let mut var = Vec::with_capacity(self.out_dim());
        for j in 0..self.out_dim() {
            let row = j * n_in..(j + 1) * n_in;
            let mut m = self.bias_mu.values[j];
            let sb = softplus(self.bias_rho.values[j]);
            let mut v = sb * sb;
            for (k, (wm, wr)) in self.weight_mu.values[row.clone()].iter().zip(&self.weight_rho.values[row]).enumerate() {
                let s = softplus(*wr);
                m += wm * x[k];
                v += s * s * x[k] * x[k];
            }
            mean.push(m);
            var.push(v);
        }
        Ok(DiagGaussian { mean, var })
    }

    /// Predictive distribution of the next latent, including observation noise.
    pub fn predict(&self, latent: &[f64], action: &[f64]) -> Result<DiagGaussian> {
        let x: Vec<f64> = latent.iter().chain(action).copied().collect();
        self.predict_input(&x)
    }

    pub fn predict_input(&self, x: &[f64]) -> Result<DiagGaussian> {
        let mut p = self.predict_parametric(x)?;
        let noise = self.obs_std * self.obs_std;
        p.var.iter_mut().for_each(|v| *v += noise);
        Ok(p)
    }

    fn check_target(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.out_dim() {
            return Err(Error::Config(format!(
                "linear model predicts {} outputs, target has {}",
                self.out_dim(),
                y.len()
            )));
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for t in [&mut self.weight_mu, &mut self.weight_rho, &mut self.bias_mu, &mut self.bias_rho] {
            t.zero_grad();
        }
    }
}

impl BayesianDynamics for BayesianLinearModel {
    fn input_dim(&self) -> usize {
        self.in_dim()
    }

    fn output_dim(&self) -> usize {
        self.out_dim()
    }

    fn posterior(&self) -> Vec<(&ParamTensor, &ParamTensor)> {
        vec![(&self.weight_mu, &self.weight_rho), (&self.bias_mu, &self.bias_rho)]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight_mu, &mut self.weight_rho, &mut self.bias_mu, &mut self.bias_rho]
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
            self.check_input(x)?;
            self.check_target(y)?;
        }
        self.zero_grad();
        let (n_out, n_in) = (self.out_dim(), self.in_dim());
        let inv_noise = 1.0 / (self.obs_std * self.obs_std);
        let scale = 1.0 / (batch.len() * n_samples) as f64;
        let sigma_w: Vec<f64> = self.weight_rho.values.iter().map(|r| softplus(*r)).collect();
        let sigma_b: Vec<f64> = self.bias_rho.values.iter().map(|r| softplus(*r)).collect();

        let mut nll = 0.0;
        let mut eps_w = vec![0.0; n_out * n_in];
        let mut eps_b = vec![0.0; n_out];
        let mut w = vec![0.0; n_out * n_in];
        let mut b = vec![0.0; n_out];
        let mut g_w = vec![0.0; n_out * n_in];
        let mut g_b = vec![0.0; n_out];
        for _ in 0..n_samples {
            for i in 0..w.len() {
                eps_w[i] = StandardNormal.sample(rng);
                w[i] = self.weight_mu.values[i] + sigma_w[i] * eps_w[i];
            }
            for j in 0..n_out {
                eps_b[j] = StandardNormal.sample(rng);
                b[j] = self.bias_mu.values[j] + sigma_b[j] * eps_b[j];
            }
            g_w.fill(0.0);
            g_b.fill(0.0);
            for (x, y) in batch {
                for j in 0..n_out {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let pred = b[j] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                    let r = y[j] - pred;
                    nll += 0.5 * r * r * inv_noise;
                    // d nll / d pred = -r / σ²
                    let d = -r * inv_noise;
                    g_b[j] += d;
                    for (g, xi) in g_w[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            for i in 0..w.len() {
                self.weight_mu.grad[i] += scale * g_w[i];
                self.weight_rho.grad[i] += scale * g_w[i] * eps_w[i] * sigmoid(self.weight_rho.values[i]);
            }
            for j in 0..n_out {
                self.bias_mu.grad[j] += scale * g_b[j];
                self.bias_rho.grad[j] += scale * g_b[j] * eps_b[j] * sigmoid(self.bias_rho.values[j]);
            }
        }
        let const_term = n_out as f64 * (self.obs_std.ln() + HALF_LN_2PI);
        let nll = nll * scale + const_term;

        let kl_scale = 1.0 / dataset_size as f64;
        let prior = self.prior_std;
        add_prior_kl_grad(
            &self.weight_mu.values,
            &self.weight_rho.values,
            prior,
            kl_scale,
            &mut self.weight_mu.grad,
            &mut self.weight_rho.grad,
        );
        add_prior_kl_grad(
            &self.bias_mu.values,
            &self.bias_rho.values,
            prior,
            kl_scale,
            &mut self.bias_mu.grad,
            &mut self.bias_rho.grad,
        );
        let loss = nll + kl_scale * self.kl_to_prior();

        for t in [&self.weight_mu, &self.weight_rho, &self.bias_mu, &self.bias_rho] {
            ensure_finite(&format!("ELBO gradient of {}", t.name), &t.grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("ELBO loss".into()));
        }
        Ok(loss)
    }

    /// Closed form: with `m = μ_W x + μ_b` and `v = σ_W² x² + σ_b²`, the
    /// expected negative log-likelihood is `((y - m)² + v) / 2σ_obs² + const`.
    fn transition_gradient(&self, x: &[f64], y: &[f64], dataset_size: usize, _rng: &mut Rng) -> Result<Vec<BlockGrad>> {
        self.check_input(x)?;
        self.check_target(y)?;
        if dataset_size == 0 {
            return Err(Error::Usage("dataset size must be positive".into()));
        }
        let (n_out, n_in) = (self.out_dim(), self.in_dim());
        let inv_noise = 1.0 / (self.obs_std * self.obs_std);
        let mean = self.predict_parametric(x)?.mean;
        let mut gw = BlockGrad {
            mu: vec![0.0; n_out * n_in],
            rho: vec![0.0; n_out * n_in],
        };
        let mut gb = BlockGrad {
            mu: vec![0.0; n_out],
            rho: vec![0.0; n_out],
        };
        for j in 0..n_out {
            let d = -(y[j] - mean[j]) * inv_noise;
            gb.mu[j] = d;
            let rb = self.bias_rho.values[j];
            gb.rho[j] = softplus(rb) * inv_noise * sigmoid(rb);
            for i in 0..n_in {
                let k = j * n_in + i;
                let r = self.weight_rho.values[k];
                gw.mu[k] = d * x[i];
                gw.rho[k] = softplus(r) * x[i] * x[i] * inv_noise * sigmoid(r);
            }
        }
        let kl_scale = 1.0 / dataset_size as f64;
        add_prior_kl_grad(&self.weight_mu.values, &self.weight_rho.values, self.prior_std, kl_scale, &mut gw.mu, &mut gw.rho);
        add_prior_kl_grad(&self.bias_mu.values, &self.bias_rho.values, self.prior_std, kl_scale, &mut gb.mu, &mut gb.rho);
        Ok(vec![gw, gb])
    }

    fn predict_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_parametric(x)?.mean)
    }
}
