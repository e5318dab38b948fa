//! Minimal dense feedforward networks with analytic gradients.
//!
//! Every learned object in this crate (contrastive encoders, baseline
//! predictors, neural policies) is built from [`DenseNet`]. Hidden layers
//! share one activation; the output layer is always linear.

mod adam;
mod io;

pub use adam::AdamState;
pub use io::{read_f64_block, write_f64_block};

use rand::Rng;

use crate::error::{Error, Result};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Fully-connected feedforward network.
///
/// `layer_dims = [in, h1, .., out]`. Weight matrices are row-major with
/// shape `(out_dim, in_dim)` per layer. Hidden layers apply `activation`,
/// the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Per-parameter gradients, shape-matched to a [`DenseNet`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Activations recorded by [`DenseNet::forward`]; consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Post-activation values per layer, `activations[0]` being the input.
    activations: Vec<Vec<f64>>,
    layer_dims: Vec<usize>,
}

impl ForwardCache {
    /// The network output this cache was produced with.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has layers")
    }
}

impl DenseNet {
    /// Builds a network with scaled uniform fan-in initialization,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` per weight, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_dims: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, activation)?;
        for l in 0..net.weights.len() {
            let fan_in = net.layer_dims[l] as f64;
            let limit = 1.0 / fan_in.sqrt();
            for w in &mut net.weights[l] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// All-zero parameters; useful for targets and tests.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::config(format!(
                "a network needs at least input and output dims, got {:?}",
                layer_dims
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::config("layer dims must be positive"));
        }
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            weights.push(vec![0.0; w[0] * w[1]]);
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of scalar parameters (weights + biases).
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Runs the network, returning the output and a cache for `backward`.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::config(format!(
                "input length {} does not match input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        for l in 0..n_layers {
            let (in_dim, out_dim) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let prev = &activations[l];
            let mut out = vec![0.0; out_dim];
            for (o, out_val) in out.iter_mut().enumerate() {
                let row = &self.weights[l][o * in_dim..(o + 1) * in_dim];
                let mut sum = self.biases[l][o];
                for (w, x) in row.iter().zip(prev.iter()) {
                    sum += w * x;
                }
                *out_val = if l + 1 == n_layers {
                    sum
                } else {
                    self.activation.apply(sum)
                };
            }
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        let cache = ForwardCache {
            activations,
            layer_dims: self.layer_dims.clone(),
        };
        Ok((output, cache))
    }

    /// Output without a cache, for inference-only call sites.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Backpropagates `grad_output` through the cached forward pass.
    ///
    /// Returns `d(grad_output . output)/d(params)` and the gradient with
    /// respect to the input vector.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_accumulate(cache, grad_output, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`DenseNet::backward`] but accumulates into `grads` (`+=`),
    /// for batched losses. Returns the input gradient.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if cache.layer_dims != self.layer_dims {
            return Err(Error::contract(
                "forward cache does not match this network's layer dims",
            ));
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::config(format!(
                "grad_output length {} does not match output dim {}",
                grad_output.len(),
                self.output_dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut delta = grad_output.to_vec();
        for l in (0..n_layers).rev() {
            let (in_dim, out_dim) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let layer_in = &cache.activations[l];
            let layer_out = &cache.activations[l + 1];
            // Output layer is linear; hidden layers chain the activation.
            if l + 1 != n_layers {
                for (d, y) in delta.iter_mut().zip(layer_out.iter()) {
                    *d *= self.activation.grad_from_output(*y);
                }
            }
            let mut prev_delta = vec![0.0; in_dim];
            for o in 0..out_dim {
                let dz = delta[o];
                grads.biases[l][o] += dz;
                let row = o * in_dim;
                let w_row = &self.weights[l][row..row + in_dim];
                let g_row = &mut grads.weights[l][row..row + in_dim];
                for i in 0..in_dim {
                    g_row[i] += dz * layer_in[i];
                    prev_delta[i] += dz * w_row[i];
                }
            }
            delta = prev_delta;
        }
        Ok(delta)
    }

    /// Copies all parameters into one flat vector (weights then bias, per layer).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Overwrites all parameters from a flat vector produced by [`DenseNet::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::config(format!(
                "flat parameter length {} does not match {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in 0..self.weights.len() {
            let wn = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[offset..offset + wn]);
            offset += wn;
            let bn = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[offset..offset + bn]);
            offset += bn;
        }
        Ok(())
    }

    /// Applies one Adam step to this network's parameters.
    pub fn adam_step(&mut self, state: &mut AdamState, grads: &Gradients) -> Result<()> {
        let mut flat = self.params_flat();
        let grad_flat = grads.flat();
        state.step(&mut flat, &grad_flat)?;
        self.set_params_flat(&flat)
    }

    #[cfg(test)]
    pub(crate) fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: f64) {
        let in_dim = self.layer_dims[layer];
        self.weights[layer][row * in_dim + col] = value;
    }

    #[cfg(test)]
    pub(crate) fn set_bias(&mut self, layer: usize, row: usize, value: f64) {
        self.biases[layer][row] = value;
    }
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w.iter_mut() {
                *x *= factor;
            }
        }
        for b in &mut self.biases {
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}
