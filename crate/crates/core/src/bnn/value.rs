use crate::error::{Error, Result};
use crate::nn::Mlp;

use super::DiagGaussian;

/// Weights and bias of the value network's final affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ValueHead {
    /// Reads the head from the network as it is now.
    pub fn from_value_net(net: &Mlp) -> Result<Self> {
        let last = net.layers().last().expect("networks have at least one layer");
        if last.output_dim() != 1 {
            return Err(Error::Config("value head must have a single output".into()));
        }
        Ok(Self {
            weights: last.weight.values.clone(),
            bias: last.bias.values[0],
        })
    }
}

/// Pushes a diagonal Gaussian over the head's input through `v = W l + b`:
/// `E[v] = W μ + b` and `Var[v] = Σ W_i² σ_i²`.
pub fn value_distribution(pred: &DiagGaussian, head: &ValueHead) -> Result<(f64, f64)> {
    if pred.len() != head.weights.len() {
        return Err(Error::Config(format!(
            "head expects {} features, distribution has {}",
            head.weights.len(),
            pred.len()
        )));
    }
    let mean = head.weights.iter().zip(&pred.mean).map(|(w, m)| w * m).sum::<f64>() + head.bias;
    let var = head.weights.iter().zip(&pred.var).map(|(w, v)| w * w * v).sum::<f64>();
    Ok((mean, var.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_head_selects_first_coordinate() {
        let head = ValueHead {
            weights: vec![1.0, 0.0, 0.0],
            bias: 0.0,
        };
        let pred = DiagGaussian::new(vec![0.4, 9.0, -3.0], vec![0.2, 5.0, 1.0]).unwrap();
        assert_eq!(value_distribution(&pred, &head).unwrap(), (0.4, 0.2));
    }

    #[test]
    fn degenerate_prediction_is_deterministic_value() {
        let head = ValueHead {
            weights: vec![0.5, -2.0],
            bias: 0.25,
        };
        let pred = DiagGaussian {
            mean: vec![1.0, 1.0],
            var: vec![0.0, 0.0],
        };
        let (m, v) = value_distribution(&pred, &head).unwrap();
        assert_eq!(m, 0.5 - 2.0 + 0.25);
        assert_eq!(v, 0.0);
    }
}
