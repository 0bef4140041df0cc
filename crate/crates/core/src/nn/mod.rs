//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Networks here are tiny and have a fixed topology, so there is no general
//! graph engine: [`Mlp::forward`] records the per-layer inputs and
//! activations in a [`Trace`], and [`Mlp::backward`] walks that record in
//! reverse, accumulating parameter gradients into each [`ParamTensor`].

mod adam;

pub use adam::Adam;

use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rng;

/// A named block of parameters together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(name, shape);
        t.values.fill(value);
        t
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::Config(format!(
                "tensor with shape {shape:?} needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; len],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map followed by an elementwise activation.
///
/// The weight is stored row-major with shape `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(name: &str, input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: ParamTensor::zeros(format!("{name}.weight"), &[output, input]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[output]),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    /// `W x + b`, before the activation.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        self.weight
            .values
            .chunks_exact(n_in)
            .zip(&self.bias.values)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// A multilayer perceptron.
#[derive(Debug, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    #[serde(skip, default = "next_id")]
    id: u64,
    #[serde(skip)]
    version: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: next_id(),
            version: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Everything the backward pass needs from one forward evaluation.
///
/// A trace is bound to the network (and the parameter version) that produced
/// it and is consumed by [`Mlp::backward`].
#[derive(Debug)]
pub struct Trace {
    net_id: u64,
    version: u64,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Config(format!(
                    "layer {} outputs {} values but {} expects {}",
                    pair[0].weight.name,
                    pair[0].output_dim(),
                    pair[1].weight.name,
                    pair[1].input_dim()
                )));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.output_dim()
                || layer.weight.len() != layer.input_dim() * layer.output_dim()
            {
                return Err(Error::Config(format!("malformed layer {}", layer.weight.name)));
            }
        }
        Ok(Self {
            layers,
            id: next_id(),
            version: 0,
        })
    }

    /// Orthogonally initialised network. Hidden layers use `hidden_activation`
    /// and gain `hidden_gain`; the output layer is affine with `output_gain`.
    /// Biases start at zero.
    pub fn orthogonal(
        prefix: &str,
        sizes: &[usize],
        hidden_activation: Activation,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let last = i + 1 == n;
                let (act, gain) = if last {
                    (Activation::Identity, output_gain)
                } else {
                    (hidden_activation, hidden_gain)
                };
                let mut layer = Layer::zeros(&format!("{prefix}.{i}"), sizes[i], sizes[i + 1], act);
                layer.weight.values = orthogonal_matrix(sizes[i + 1], sizes[i], gain, rng);
                layer
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers. Outstanding traces become stale.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    /// Mutable access to every parameter block. Outstanding traces become stale.
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.weight.zero_grad();
            layer.bias.zero_grad();
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        Ok(())
    }

    /// Output without recording a trace.
    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.affine(&x);
            z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            x = z;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Trace)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.affine(&x);
            z.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            inputs.push(std::mem::replace(&mut x, z.clone()));
            outputs.push(z);
        }
        let trace = Trace {
            net_id: self.id,
            version: self.version,
            inputs,
            outputs,
        };
        Ok((x, trace))
    }

    /// Accumulates `upstream`-weighted gradients into every parameter and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, trace: Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        if trace.net_id != self.id || trace.version != self.version {
            return Err(Error::Usage(
                "trace was produced by another network or before a parameter update".into(),
            ));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::Usage(format!(
                "upstream gradient has {} entries, network outputs {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let x = &trace.inputs[i];
            let y = &trace.outputs[i];
            for (d, yj) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative_from_output(*yj);
            }
            let n_in = x.len();
            let mut next = vec![0.0; n_in];
            for (j, dj) in delta.iter().enumerate() {
                layer.bias.grad[j] += dj;
                let row = j * n_in;
                let w = &layer.weight.values[row..row + n_in];
                let g = &mut layer.weight.grad[row..row + n_in];
                for k in 0..n_in {
                    g[k] += dj * x[k];
                    next[k] += dj * w[k];
                }
            }
            delta = next;
        }
        Ok(delta)
    }
}

/// Pre-activations of the final hidden layer.
///
/// These feed (through the hidden activation) the last affine layer and form
/// the feature space of the latent dynamics model.
pub fn latent_features(value_net: &Mlp, state: &[f64]) -> Result<Vec<f64>> {
    let layers = value_net.layers();
    if layers.len() < 2 {
        return Err(Error::Config(
            "latent features need a network with at least one hidden layer".into(),
        ));
    }
    value_net.check_input(state)?;
    let mut x = state.to_vec();
    let hidden = &layers[..layers.len() - 1];
    for (i, layer) in hidden.iter().enumerate() {
        let z = layer.affine(&x);
        if i + 1 == hidden.len() {
            return Ok(z);
        }
        x = z.into_iter().map(|v| layer.activation.apply(v)).collect();
    }
    unreachable!("hidden slice is non-empty")
}

/// Row-major `rows x cols` matrix whose rows (or columns, whichever are
/// fewer) are orthonormal, scaled by `gain`.
pub fn orthogonal_matrix(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<f64> {
    // work on k vectors of length n, k <= n
    let (k, n, transpose) = if rows <= cols { (rows, cols, false) } else { (cols, rows, true) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, b) in basis.iter().enumerate() {
        for (j, value) in b.iter().enumerate() {
            let (r, c) = if transpose { (j, i) } else { (i, j) };
            out[r * cols + c] = gain * value;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn single(w: Vec<f64>, b: Vec<f64>, n_in: usize, act: Activation) -> Mlp {
        let n_out = b.len();
        let mut layer = Layer::zeros("l", n_in, n_out, act);
        layer.weight.values = w;
        layer.bias.values = b;
        Mlp::from_layers(vec![layer]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, Activation::Identity);
        assert_eq!(net.eval(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn affine_tanh_step() {
        let net = single(vec![2.0], vec![1.0], 1, Activation::Tanh);
        let (y, _) = net.forward(&[0.0]).unwrap();
        assert_eq!(y, vec![1.0f64.tanh()]);
    }

    #[test]
    fn default_value_net_is_finite() {
        let mut rng = seeded_rng(3);
        let net = Mlp::orthogonal("v", &[2, 32, 32, 1], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            assert!(net.eval(&x).unwrap()[0].is_finite());
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let net = single(vec![1.0], vec![0.0], 1, Activation::Identity);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Config(_))));
    }

    #[test]
    fn square_via_product_has_gradient_six() {
        // x * x as a 1 -> 1 linear layer whose weight equals the input: d(w x)/dx = w = 3,
        // d/dw = x = 3; the total derivative of x^2 sums both paths.
        let mut net = single(vec![3.0], vec![0.0], 1, Activation::Identity);
        let (_, trace) = net.forward(&[3.0]).unwrap();
        let dx = net.backward(trace, &[1.0]).unwrap();
        let dw = net.layers()[0].weight.grad[0];
        assert_eq!(dx[0] + dw, 6.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded_rng(1);
        let mut net = Mlp::orthogonal("n", &[3, 5, 2], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        let (_, trace) = net.forward(&[0.3, -0.1, 0.9]).unwrap();
        let dx = net.backward(trace, &[0.0, 0.0]).unwrap();
        assert!(dx.iter().all(|v| *v == 0.0));
        assert!(net.params().iter().all(|p| p.grad.iter().all(|g| *g == 0.0)));
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut rng = seeded_rng(2);
        let mut net = Mlp::orthogonal("n", &[2, 4, 1], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        let (_, trace) = net.forward(&[0.1, 0.2]).unwrap();
        net.params_mut()[0].values[0] += 0.1;
        assert!(matches!(net.backward(trace, &[1.0]), Err(Error::Usage(_))));

        let other = net.clone();
        let (_, foreign) = other.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(net.backward(foreign, &[1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let mut rng = seeded_rng(4);
        let net = Mlp::orthogonal("n", &[2, 32, 32, 1], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        let a = net.forward(&[0.4, -0.7]).unwrap().0;
        let b = net.forward(&[0.4, -0.7]).unwrap().0;
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn latent_of_zero_weight_net_is_bias() {
        let mut rng = seeded_rng(5);
        let mut net = Mlp::orthogonal("v", &[2, 4, 3, 1], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        let n = net.layers().len();
        for layer in &mut net.layers_mut()[..n - 1] {
            layer.weight.values.fill(0.0);
        }
        net.layers_mut()[1].bias.values = vec![0.5, -0.25, 2.0];
        assert_eq!(latent_features(&net, &[1.0, -3.0]).unwrap(), vec![0.5, -0.25, 2.0]);
    }

    #[test]
    fn latent_is_pre_activation() {
        let mut hidden = Layer::zeros("h", 1, 1, Activation::Tanh);
        hidden.weight.values = vec![2.0];
        hidden.bias.values = vec![0.5];
        let mut out = Layer::zeros("o", 1, 1, Activation::Identity);
        out.weight.values = vec![1.0];
        let net = Mlp::from_layers(vec![hidden, out]).unwrap();
        let latent = latent_features(&net, &[1.0]).unwrap();
        assert_eq!(latent, vec![2.5]);
        assert_ne!(latent[0], 2.5f64.tanh());
    }

    #[test]
    fn latent_needs_hidden_layer() {
        let net = single(vec![1.0], vec![0.0], 1, Activation::Identity);
        assert!(matches!(latent_features(&net, &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn latent_then_head_reproduces_forward() {
        let mut rng = seeded_rng(6);
        let net = Mlp::orthogonal("v", &[2, 32, 32, 1], Activation::Tanh, 1.0, 1.0, &mut rng).unwrap();
        let s = [0.3, 0.8];
        let latent = latent_features(&net, &s).unwrap();
        assert_eq!(latent.len(), 32);
        let n = net.layers().len();
        let act = net.layers()[n - 2].activation;
        let h: Vec<f64> = latent.iter().map(|v| act.apply(*v)).collect();
        let v = net.layers()[n - 1].affine(&h);
        assert_eq!(v, net.eval(&s).unwrap());
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = seeded_rng(7);
        let m = orthogonal_matrix(3, 5, 1.0, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..5).map(|k| m[i * 5 + k] * m[j * 5 + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }
}
