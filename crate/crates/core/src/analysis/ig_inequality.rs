use std::str::FromStr;

use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::bnn::{kl_scalar, preconditioned_step, softplus, softplus_inverse, BayesianDynamics, BayesianLinearModel};
use crate::error::{Error, Result};
use crate::Rng;

use super::trial_rng;

/// Relative slack before an output KL above the model KL counts as a violation.
pub const VIOLATION_SLACK: f64 = 1e-12;
/// Tolerance of the scalar-head equality, relative to `max(1, KL)`.
pub const HEAD_TOLERANCE: f64 = 1e-10;

/// How the posterior moves in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateKind {
    /// One preconditioned step on the single-transition variational objective.
    Gradient,
    /// Exact Bayesian update of the joint `(w, b)` posterior, then its marginals.
    Conjugate,
}

impl FromStr for UpdateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Self::Gradient),
            "conjugate" => Ok(Self::Conjugate),
            other => Err(Error::Usage(format!("unknown update `{other}` (expected gradient or conjugate)"))),
        }
    }
}

/// Mean and standard deviation of a scalar Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub mean: f64,
    pub std: f64,
}

impl Scalar {
    fn kl(&self, other: &Scalar) -> f64 {
        kl_scalar(self.mean, self.std, other.mean, other.std)
    }
}

/// Factored posterior of a one-input linear model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarModel {
    pub w: Scalar,
    pub b: Scalar,
}

impl ScalarModel {
    /// `o = x w + b`.
    pub fn output(&self, x: f64) -> Scalar {
        Scalar {
            mean: x * self.w.mean + self.b.mean,
            std: (x * x * self.w.std * self.w.std + self.b.std * self.b.std).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgTrial {
    pub before: ScalarModel,
    pub after: ScalarModel,
    pub x: f64,
    pub y: f64,
    /// `KL(w₁ ‖ w₂) + KL(b₁ ‖ b₂)`
    pub ig_model: f64,
    /// `KL(o₁ ‖ o₂)`
    pub output_kl: f64,
    pub satisfied: bool,
    /// `|KL(q₁ ‖ q₂) − KL(o₁ ‖ o₂)| / max(1, KL(o₁ ‖ o₂))` through a random
    /// scalar affine head.
    pub head_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgReport {
    pub n_trials: usize,
    pub update: UpdateKind,
    pub violations: usize,
    pub violation_rate: f64,
    /// Smallest and mean `IG_model − output KL`.
    pub min_margin: f64,
    pub mean_margin: f64,
    pub head_equality_failures: usize,
    pub max_head_error: f64,
}

impl IgReport {
    /// The asserted part of the experiment: the head equality on every trial.
    pub fn passed(&self) -> bool {
        self.head_equality_failures == 0
    }
}

pub fn evaluate_trial(before: ScalarModel, after: ScalarModel, x: f64, y: f64, head_w: f64, head_b: f64) -> IgTrial {
    let ig_model = before.w.kl(&after.w) + before.b.kl(&after.b);
    let (o1, o2) = (before.output(x), after.output(x));
    let output_kl = o1.kl(&o2);
    let head = |o: Scalar| Scalar {
        mean: head_w * o.mean + head_b,
        std: head_w.abs() * o.std,
    };
    let head_error = (head(o1).kl(&head(o2)) - output_kl).abs() / output_kl.max(1.0);
    IgTrial {
        before,
        after,
        x,
        y,
        ig_model,
        output_kl,
        satisfied: output_kl <= ig_model + VIOLATION_SLACK * ig_model.max(1.0),
        head_error,
    }
}

/// Gradient variant: the same step the training pipeline scores with.
pub fn gradient_update(before: &ScalarModel, x: f64, y: f64, obs_std: f64, step: f64, dataset_size: usize, rng: &mut Rng) -> Result<ScalarModel> {
    let model = BayesianLinearModel::from_moments(
        vec![before.w.mean],
        vec![before.w.std],
        vec![before.b.mean],
        vec![before.b.std],
        1.0,
        obs_std,
    )?;
    let g = model.transition_gradient(&[x], &[y], dataset_size, rng)?;
    let moved = |m: f64, s: f64, gm: f64, gr: f64| {
        let (mu, rho, _) = preconditioned_step(m, softplus_inverse(s), gm, gr, step);
        Scalar { mean: mu, std: softplus(rho) }
    };
    Ok(ScalarModel {
        w: moved(before.w.mean, before.w.std, g[0].mu[0], g[0].rho[0]),
        b: moved(before.b.mean, before.b.std, g[1].mu[0], g[1].rho[0]),
    })
}

/// Conjugate variant: joint Gaussian posterior after observing
/// `y = x w + b + ε`, reduced to its marginals.
pub fn conjugate_update(before: &ScalarModel, x: f64, y: f64, obs_std: f64) -> ScalarModel {
    let noise = 1.0 / (obs_std * obs_std);
    let (pw, pb) = (1.0 / before.w.std.powi(2), 1.0 / before.b.std.powi(2));
    // Posterior precision [[a, c], [c, d]].
    let a = pw + x * x * noise;
    let c = x * noise;
    let d = pb + noise;
    let det = a * d - c * c;
    let (cov_ww, cov_wb, cov_bb) = (d / det, -c / det, a / det);
    let rw = pw * before.w.mean + x * y * noise;
    let rb = pb * before.b.mean + y * noise;
    ScalarModel {
        w: Scalar { mean: cov_ww * rw + cov_wb * rb, std: cov_ww.sqrt() },
        b: Scalar { mean: cov_wb * rw + cov_bb * rb, std: cov_bb.sqrt() },
    }
}

fn sample_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One random trial: posterior, observation, update and head.
pub fn sample_trial(update: UpdateKind, rng: &mut Rng) -> Result<IgTrial> {
    let normal = Normal::new(0.0, 1.0).expect("valid");
    let stds = Uniform::new(0.1, 1.0).expect("valid");
    let before = ScalarModel {
        w: Scalar { mean: normal.sample(rng), std: stds.sample(rng) },
        b: Scalar { mean: normal.sample(rng), std: stds.sample(rng) },
    };
    let x = 1.5 * sample_normal(rng);
    let y = 2.0 * sample_normal(rng);
    let obs_std = stds.sample(rng);
    let after = match update {
        UpdateKind::Gradient => {
            let log_step = Uniform::new(-4.0, -2.0).expect("valid").sample(rng);
            gradient_update(&before, x, y, obs_std, 10f64.powf(log_step), 100, rng)?
        }
        UpdateKind::Conjugate => conjugate_update(&before, x, y, obs_std),
    };
    let head_w = {
        let m = Uniform::new(0.1, 3.0).expect("valid").sample(rng);
        if normal.sample(rng) < 0.0 { -m } else { m }
    };
    let head_b = normal.sample(rng);
    Ok(evaluate_trial(before, after, x, y, head_w, head_b))
}

pub fn run_ig_inequality(n_trials: usize, update: UpdateKind, seed: u64) -> Result<(IgReport, Vec<IgTrial>)> {
    if n_trials == 0 {
        return Err(Error::Usage("n_trials must be at least 1".into()));
    }
    let trials = (0..n_trials)
        .map(|i| sample_trial(update, &mut trial_rng(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let margins: Vec<f64> = trials.iter().map(|t| t.ig_model - t.output_kl).collect();
    let violations = trials.iter().filter(|t| !t.satisfied).count();
    let report = IgReport {
        n_trials,
        update,
        violations,
        violation_rate: violations as f64 / n_trials as f64,
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        mean_margin: margins.iter().sum::<f64>() / n_trials as f64,
        head_equality_failures: trials.iter().filter(|t| !(t.head_error <= HEAD_TOLERANCE)).count(),
        max_head_error: trials.iter().map(|t| t.head_error).fold(0.0, f64::max),
    };
    Ok((report, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn null_update_is_tight() {
        let m = ScalarModel {
            w: Scalar { mean: 0.3, std: 0.5 },
            b: Scalar { mean: -1.0, std: 0.2 },
        };
        let t = evaluate_trial(m, m, 0.7, 0.0, 2.0, 1.0);
        assert_eq!((t.ig_model, t.output_kl), (0.0, 0.0));
        assert!(t.satisfied);
        let moved = gradient_update(&m, 0.7, 1.0, 0.3, 0.0, 100, &mut seeded_rng(0)).unwrap();
        assert_eq!(moved, m);
    }

    #[test]
    fn conjugate_update_matches_regression_formula() {
        // With b known (σ_b → 0) the w posterior is the textbook 1-D update.
        let m = ScalarModel {
            w: Scalar { mean: 0.5, std: 1.0 },
            b: Scalar { mean: 0.0, std: 1e-9 },
        };
        let (x, y, s) = (2.0, 3.0, 0.5);
        let post = conjugate_update(&m, x, y, s);
        let prec = 1.0 + x * x / (s * s);
        let mean = (0.5 + x * y / (s * s)) / prec;
        assert!((post.w.mean - mean).abs() < 1e-6);
        assert!((post.w.std - prec.powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn small_sweep_has_exact_head_equality() {
        for kind in [UpdateKind::Gradient, UpdateKind::Conjugate] {
            let (r, _) = run_ig_inequality(200, kind, 3).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }
}
