//! Central finite differences (h = 1e-5) against every analytic gradient.
//! Each check returns the worst relative error over its instances.

use imle_core::bnn::{softplus, BayesianDynamics, BayesianLinearModel, BayesianMlp};
use imle_core::nn::{Activation, Mlp, ParamTensor};
use imle_core::ppo::{sample_loss, GaussianPolicy, PpoConfig, ValueNet};
use imle_core::{seeded_rng, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 100;

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Relative error with a floor so that entries whose true gradient is
/// essentially zero are compared absolutely.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the gradients stored in `tensors(model)` after `analytic(model)`
/// with central differences of `loss(model)`. Returns the worst error.
fn check<M>(
    model: &mut M,
    tensors: impl Fn(&mut M) -> Vec<&mut ParamTensor>,
    analytic: impl Fn(&mut M),
    loss: impl Fn(&mut M) -> f64,
) -> f64 {
    analytic(model);
    let grads: Vec<Vec<f64>> = tensors(model).iter().map(|t| t.grad.clone()).collect();
    let mut worst = 0.0f64;
    for (ti, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = tensors(model)[ti].values[i];
            tensors(model)[ti].values[i] = orig + H;
            let up = loss(model);
            tensors(model)[ti].values[i] = orig - H;
            let down = loss(model);
            tensors(model)[ti].values[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let e = rel_err(g[i], numeric);
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}

fn randomize(tensors: Vec<&mut ParamTensor>, scale: f64, rng: &mut Rng) {
    for t in tensors {
        for v in &mut t.values {
            *v = scale * normal(rng);
        }
    }
}

fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

pub fn mlp_gradients() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = seeded_rng(seed);
        let n_in = rng.random_range(1..5);
        let n_out = rng.random_range(1..4);
        let sizes = [n_in, rng.random_range(2..9), rng.random_range(2..9), n_out];
        let mut net = Mlp::orthogonal("t", &sizes, Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        randomize(net.params_mut(), 0.7, &mut rng);
        let x = random_vec(n_in, &mut rng);
        let u = random_vec(n_out, &mut rng);
        let f = |net: &Mlp, x: &[f64]| net.eval(x).unwrap().iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();

        let e = check(
            &mut net,
            |n| n.params_mut(),
            |n| {
                n.zero_grad();
                let (_, trace) = n.forward(&x).unwrap();
                n.backward(trace, &u).unwrap();
            },
            |n| f(n, &x),
        );
        worst = worst.max(e);

        net.zero_grad();
        let (_, trace) = net.forward(&x).unwrap();
        let gx = net.backward(trace, &u).unwrap();
        for i in 0..n_in {
            let mut xp = x.clone();
            xp[i] += H;
            let mut xm = x.clone();
            xm[i] -= H;
            worst = worst.max(rel_err(gx[i], (f(&net, &xp) - f(&net, &xm)) / (2.0 * H)));
        }
    }
    worst
}

struct ActorCritic {
    policy: GaussianPolicy,
    value: ValueNet,
}

impl ActorCritic {
    fn tensors(&mut self) -> Vec<&mut ParamTensor> {
        let mut t = self.policy.params_mut();
        t.extend(self.value.net.params_mut());
        t
    }
}

pub fn ppo_loss_gradients() -> f64 {
    let cfg = PpoConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = seeded_rng(1000 + seed);
        let obs_dim = rng.random_range(1..5);
        let act_dim = rng.random_range(1..3);
        let mut ac = ActorCritic {
            policy: GaussianPolicy::with_hidden(obs_dim, act_dim, &[6, 6], &mut rng).unwrap(),
            value: ValueNet::with_hidden(obs_dim, &[5, 5], &mut rng).unwrap(),
        };
        randomize(ac.tensors(), 0.5, &mut rng);
        let obs = random_vec(obs_dim, &mut rng);
        let action = random_vec(act_dim, &mut rng);
        let advantage = normal(&mut rng);
        let target = normal(&mut rng);
        // Old log-probability chosen so the ratio lands anywhere in [0.6, 1.4],
        // covering both clipped and unclipped samples.
        let lp = ac.policy.log_prob(&obs, &action).unwrap();
        let old_lp = lp - rng.random_range(0.6f64..1.4).ln();

        let eval = |ac: &mut ActorCritic| {
            let l = sample_loss(&mut ac.policy, &mut ac.value, &obs, &action, old_lp, advantage, target, &cfg, 1.0).unwrap();
            l.total(&cfg, 0.0)
        };
        let e = check(
            &mut ac,
            |ac| ac.tensors(),
            |ac| {
                ac.policy.zero_grad();
                ac.value.net.zero_grad();
                eval(ac);
            },
            eval,
        );
        worst = worst.max(e);
    }
    worst
}

/// The ELBO with a fixed noise stream is a deterministic function of the
/// posterior parameters; its reparameterised gradient must be exact.
fn elbo_check<M: BayesianDynamics>(model: &mut M, batch: &[(Vec<f64>, Vec<f64>)], noise_seed: u64) -> f64 {
    let loss = |m: &mut M| m.elbo_loss(batch, 3, 50, &mut seeded_rng(noise_seed)).unwrap();
    check(model, |m| m.params_mut(), |m| {
        loss(m);
    }, loss)
}

fn random_batch(n_in: usize, n_out: usize, len: usize, rng: &mut Rng) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..len).map(|_| (random_vec(n_in, rng), random_vec(n_out, rng))).collect()
}

pub fn linear_elbo_gradients() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = seeded_rng(2000 + seed);
        let (n_in, n_out) = (rng.random_range(1..5), rng.random_range(1..4));
        let mut m = BayesianLinearModel::new(n_in, n_out, 0.5, rng.random_range(0.3..1.0), 0.3, &mut rng).unwrap();
        randomize(vec![&mut m.weight_mu, &mut m.bias_mu], 0.5, &mut rng);
        for t in [&mut m.weight_rho, &mut m.bias_rho] {
            for v in &mut t.values {
                *v = rng.random_range(-3.0..0.5);
            }
        }
        let batch = random_batch(n_in, n_out, 4, &mut rng);
        worst = worst.max(elbo_check(&mut m, &batch, seed));
    }
    worst
}

pub fn deep_elbo_gradients() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = seeded_rng(3000 + seed);
        let sizes = [rng.random_range(1..4), rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..3)];
        let mut m = BayesianMlp::new(&sizes, 0.5, 0.5, 0.2, 1, &mut rng).unwrap();
        let batch = random_batch(sizes[0], sizes[3], 3, &mut rng);
        worst = worst.max(elbo_check(&mut m, &batch, seed));
    }
    worst
}

/// Oracle for the closed-form single-transition objective of the linear
/// model, written out independently of the library.
fn transition_objective(m: &BayesianLinearModel, x: &[f64], y: &[f64], n: usize) -> f64 {
    let (n_out, n_in) = (m.out_dim(), m.in_dim());
    let s2 = m.obs_std * m.obs_std;
    let mut total = 0.0;
    for j in 0..n_out {
        let mut mean = m.bias_mu.values[j];
        let mut var = softplus(m.bias_rho.values[j]).powi(2);
        for i in 0..n_in {
            mean += m.weight_mu.values[j * n_in + i] * x[i];
            var += softplus(m.weight_rho.values[j * n_in + i]).powi(2) * x[i] * x[i];
        }
        total += ((y[j] - mean).powi(2) + var) / (2.0 * s2);
    }
    let p2 = m.prior_std * m.prior_std;
    let mut kl = 0.0;
    for (mu, rho) in [(&m.weight_mu, &m.weight_rho), (&m.bias_mu, &m.bias_rho)] {
        for (a, r) in mu.values.iter().zip(&rho.values) {
            let s = softplus(*r);
            kl += (m.prior_std / s).ln() + (s * s + a * a) / (2.0 * p2) - 0.5;
        }
    }
    total + kl / n as f64
}

pub fn linear_transition_gradient() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = seeded_rng(4000 + seed);
        let (n_in, n_out) = (rng.random_range(1..5), rng.random_range(1..4));
        let mut m = BayesianLinearModel::new(n_in, n_out, 0.5, 0.4, 0.3, &mut rng).unwrap();
        randomize(vec![&mut m.weight_mu, &mut m.bias_mu], 0.5, &mut rng);
        let x = random_vec(n_in, &mut rng);
        let y = random_vec(n_out, &mut rng);
        let g = m.transition_gradient(&x, &y, 20, &mut rng).unwrap();
        let analytic: Vec<&Vec<f64>> = vec![&g[0].mu, &g[0].rho, &g[1].mu, &g[1].rho];
        let base = m.clone();
        for (ti, a) in analytic.iter().enumerate() {
            for i in 0..a.len() {
                let eval = |delta: f64| {
                    let mut p = base.clone();
                    p.params_mut()[ti].values[i] += delta;
                    transition_objective(&p, &x, &y, 20)
                };
                worst = worst.max(rel_err(a[i], (eval(H) - eval(-H)) / (2.0 * H)));
            }
        }
    }
    worst
}
