use crate::error::{Error, Result};

/// Independent Gaussians given by per-coordinate mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::Config(format!(
                "mean has {} entries, variance {}",
                mean.len(),
                var.len()
            )));
        }
        if let Some(v) = var.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("variance must be positive and finite, got {v}")));
        }
        Ok(Self { mean, var })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// KL of one scalar Gaussian from another, in terms of standard deviations.
///
/// Written as `(u - ln(1 + u)) + u²/2 + d²/(2σ_q²)` with `u = σ_p/σ_q - 1`,
/// which keeps full relative precision when the two are nearly equal.
#[inline]
pub fn kl_scalar(mean_p: f64, std_p: f64, mean_q: f64, std_q: f64) -> f64 {
    let d = (mean_p - mean_q) / std_q;
    let u = (std_p - std_q) / std_q;
    u_minus_ln1p(u) + 0.5 * u * u + 0.5 * d * d
}

#[inline]
fn u_minus_ln1p(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        u2 * (0.5 - u / 3.0 + u2 / 4.0 - u2 * u / 5.0)
    } else {
        u - u.ln_1p()
    }
}

/// `KL(p ‖ q)` summed over coordinates.
pub fn kl_diag_gauss(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Config(format!(
            "cannot compare Gaussians of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    for v in p.var.iter().chain(&q.var) {
        if !(*v > 0.0) {
            return Err(Error::Domain(format!("nonpositive variance {v}")));
        }
    }
    Ok(p.mean
        .iter()
        .zip(&p.var)
        .zip(q.mean.iter().zip(&q.var))
        .map(|((mp, vp), (mq, vq))| kl_scalar(*mp, vp.sqrt(), *mq, vq.sqrt()))
        .sum())
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of [`softplus`] for positive `y`.
#[inline]
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}
