use crate::error::{Error, Result};

use super::ParamTensor;

/// Bias-corrected Adam.
///
/// Moment buffers are allocated lazily on the first step and keyed by the
/// position of each tensor in the slice handed to [`Adam::step`], so callers
/// must always pass parameters in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients stored in each tensor.
    ///
    /// Gradients are checked before anything is written, so a NaN leaves the
    /// parameters and the moments untouched.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        for p in params.iter() {
            if p.grad.len() != p.values.len() {
                return Err(Error::Config(format!("gradient shape mismatch in {}", p.name)));
            }
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("gradient of {}", p.name)));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::Config("parameter layout changed between Adam steps".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.values.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(value: f64, grad: f64) -> ParamTensor {
        let mut p = ParamTensor::filled("p", &[1], value);
        p.grad[0] = grad;
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ParamTensor::from_values("w", &[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.values.clone();
        let mut adam = Adam::new(0.1);
        adam.step(&mut [&mut p]).unwrap();
        assert_eq!(p.values, before);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = scalar(0.0, 1.0);
        let mut adam = Adam::new(0.1);
        adam.step(&mut [&mut p]).unwrap();
        let expected = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p.values[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn moments_carry_between_steps() {
        let mut once = scalar(0.0, 1.0);
        let mut adam_once = Adam::new(0.1);
        adam_once.step(&mut [&mut once]).unwrap();

        let mut twice = scalar(0.0, 1.0);
        let mut adam_twice = Adam::new(0.1);
        adam_twice.step(&mut [&mut twice]).unwrap();
        adam_twice.step(&mut [&mut twice]).unwrap();
        assert_ne!(once.values, twice.values);
        assert_eq!(adam_twice.steps_taken(), 2);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = scalar(1.0, f64::NAN);
        p.name = "value.2.weight".into();
        let err = Adam::new(0.1).step(&mut [&mut p]).unwrap_err();
        assert!(err.to_string().contains("value.2.weight"));
        assert_eq!(p.values[0], 1.0);
    }
}
