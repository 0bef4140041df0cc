//! Closed-form predictive and value moments against sampling oracles.

use imle_core::bnn::{softplus, value_distribution, BayesianLinearModel, DiagGaussian, ValueHead};
use imle_core::{seeded_rng, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub const SAMPLES: usize = 100_000;
pub const MODELS: u64 = 100;

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Moments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    Moments {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - var * var) / n).sqrt(),
    }
}

/// z-scores of the sample means and variances, in units of their
/// sampling standard errors.
fn z_scores(samples: &[Vec<f64>], mean: &[f64], var: &[f64]) -> Vec<f64> {
    samples
        .iter()
        .enumerate()
        .flat_map(|(j, s)| {
            let m = moments(s);
            [(m.mean - mean[j]) / m.se_mean, (m.var - var[j]) / m.se_var]
        })
        .collect()
}

/// Smallest k with P(Binomial(n, p) ≤ k) ≥ 0.999.
fn binomial_quantile(n: usize, p: f64) -> usize {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut cdf = pmf;
    let mut k = 0;
    while cdf < 0.999 && k < n {
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        k += 1;
        cdf += pmf;
    }
    k
}

pub struct Consistency {
    pub statistics: usize,
    pub beyond_3se: usize,
    pub allowed: usize,
    pub worst: f64,
}

impl Consistency {
    /// Every statistic is compared at 3 standard errors. Under a correct
    /// implementation each comparison still exceeds that with probability
    /// 0.27%, so the count of such exceedances must be consistent with chance
    /// and no deviation may reach 5 standard errors.
    pub fn passed(&self) -> bool {
        self.beyond_3se <= self.allowed && self.worst < 5.0
    }
}

impl std::fmt::Display for Consistency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} statistics, {} beyond 3 SE (chance bound {}), worst |z| = {:.3}",
            self.statistics, self.beyond_3se, self.allowed, self.worst
        )
    }
}

pub fn consistency(z: &[f64]) -> Consistency {
    Consistency {
        statistics: z.len(),
        beyond_3se: z.iter().filter(|v| v.abs() >= 3.0).count(),
        allowed: binomial_quantile(z.len(), 0.0027),
        worst: z.iter().map(|v| v.abs()).fold(0.0, f64::max),
    }
}

fn random_model(rng: &mut Rng) -> BayesianLinearModel {
    let n_in = rng.random_range(1..5);
    let n_out = rng.random_range(1..4);
    let w_mean = (0..n_in * n_out).map(|_| normal(rng)).collect();
    let w_std = (0..n_in * n_out).map(|_| rng.random_range(0.05..1.0)).collect();
    let b_mean = (0..n_out).map(|_| normal(rng)).collect();
    let b_std = (0..n_out).map(|_| rng.random_range(0.05..1.0)).collect();
    BayesianLinearModel::from_moments(w_mean, w_std, b_mean, b_std, 0.5, rng.random_range(0.01..0.5)).unwrap()
}

/// z-scores of predictive means and variances against weight sampling.
pub fn predict_z_scores() -> Vec<f64> {
    let mut z = Vec::new();
    for seed in 0..MODELS {
        let mut rng = seeded_rng(seed);
        let m = random_model(&mut rng);
        let (n_in, n_out) = (m.in_dim(), m.out_dim());
        let x: Vec<f64> = (0..n_in).map(|_| normal(&mut rng)).collect();
        let pred = m.predict_input(&x).unwrap();
        let mut rng = seeded_rng(500_000 + seed);

        let mut samples = vec![Vec::with_capacity(SAMPLES); n_out];
        for _ in 0..SAMPLES {
            for (j, out) in samples.iter_mut().enumerate() {
                let mut y = m.bias_mu.values[j] + softplus(m.bias_rho.values[j]) * normal(&mut rng);
                for i in 0..n_in {
                    let k = j * n_in + i;
                    let w = m.weight_mu.values[k] + softplus(m.weight_rho.values[k]) * normal(&mut rng);
                    y += w * x[i];
                }
                out.push(y + m.obs_std * normal(&mut rng));
            }
        }
        z.extend(z_scores(&samples, &pred.mean, &pred.var));
    }
    z
}

/// z-scores of value means and variances against latent sampling.
pub fn value_z_scores() -> Vec<f64> {
    let mut z = Vec::new();
    for seed in 0..MODELS {
        let mut rng = seeded_rng(10_000 + seed);
        let d = rng.random_range(1..9);
        let pred = DiagGaussian::new(
            (0..d).map(|_| normal(&mut rng)).collect(),
            (0..d).map(|_| rng.random_range(0.01..2.0)).collect(),
        )
        .unwrap();
        let head = ValueHead {
            weights: (0..d).map(|_| normal(&mut rng)).collect(),
            bias: normal(&mut rng),
        };
        let (mean, var) = value_distribution(&pred, &head).unwrap();
        let mut rng = seeded_rng(600_000 + seed);
        let samples: Vec<f64> = (0..SAMPLES)
            .map(|_| {
                head.bias
                    + (0..d)
                        .map(|i| head.weights[i] * (pred.mean[i] + pred.var[i].sqrt() * normal(&mut rng)))
                        .sum::<f64>()
            })
            .collect();
        z.extend(z_scores(&[samples], &[mean], &[var]));
    }
    z
}
