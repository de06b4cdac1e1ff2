//! A small dense network with tanh hidden layers, a linear output layer,
//! and hand-rolled backpropagation.
//!
//! Gradients come back in a structure of the same shape as the parameters
//! ([`Mlp::zeros_like`]), which keeps the optimizer state and the
//! finite-difference checks straightforward. `to_flat` / `assign_flat`
//! expose the parameter vector for perturbation-based tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer; `weights` is row-major `[out_dim][in_dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Multilayer perceptron; all layers but the last apply tanh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Post-activation outputs of every layer for one input, plus the input
/// itself; consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l+1]` the output of layer l.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache never empty")
    }
}

impl Mlp {
    /// Xavier-uniform initialization for the given layer sizes
    /// (`sizes[0]` inputs through `sizes[last]` outputs).
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    /// Same architecture, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Forward pass returning only the output vector.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).activations.pop().unwrap()
    }

    /// Forward pass caching every activation for a later backward pass.
    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let x = activations.last().unwrap();
            let last = li + 1 == self.layers.len();
            let mut out = Vec::with_capacity(layer.out_dim);
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, xi) in row.iter().zip(x.iter()) {
                    z += w * xi;
                }
                out.push(if last { z } else { z.tanh() });
            }
            activations.push(out);
        }
        ForwardCache { activations }
    }

    /// Backpropagate `dloss_doutput` through the cached pass, accumulating
    /// parameter gradients into `grad` (same shape as `self`).
    pub fn backward(&self, cache: &ForwardCache, dloss_doutput: &[f64], grad: &mut Mlp) {
        debug_assert_eq!(dloss_doutput.len(), self.output_dim());
        let mut delta = dloss_doutput.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.activations[li];
            let glayer = &mut grad.layers[li];
            for o in 0..layer.out_dim {
                let d = delta[o];
                glayer.biases[o] += d;
                let grow = &mut glayer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, xi) in grow.iter_mut().zip(input.iter()) {
                    *g += d * xi;
                }
            }
            if li == 0 {
                break;
            }
            // delta for the previous layer: (W^T delta) * tanh'(a_prev).
            let prev_act = &cache.activations[li];
            let mut next = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (n, w) in next.iter_mut().zip(row.iter()) {
                    *n += d * w;
                }
            }
            for (n, a) in next.iter_mut().zip(prev_act.iter()) {
                *n *= 1.0 - a * a;
            }
            delta = next;
        }
    }

    /// `self += scale * other`, elementwise over all parameters.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        for (l, o) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (a, b) in l.weights.iter_mut().zip(o.weights.iter()) {
                *a += scale * b;
            }
            for (a, b) in l.biases.iter_mut().zip(o.biases.iter()) {
                *a += scale * b;
            }
        }
    }

    /// Multiply every parameter by `scale`.
    pub fn scale(&mut self, scale: f64) {
        for l in self.layers.iter_mut() {
            for w in l.weights.iter_mut() {
                *w *= scale;
            }
            for b in l.biases.iter_mut() {
                *b *= scale;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Sum of squared parameters (used for gradient-norm clipping).
    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().map(|v| v * v).sum::<f64>()
                    + l.biases.iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Flatten all parameters (weights then biases, layer by layer).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Overwrite all parameters from a flat vector in `to_flat` order.
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut idx = 0;
        for l in self.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[idx..idx + nw]);
            idx += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[idx..idx + nb]);
            idx += nb;
        }
    }
}

/// Momentum-free adaptive step: per-parameter gradient scaling by a running
/// average of squared gradients (RMSProp). `Sgd` applies the raw gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Sgd,
    RmsProp,
}

/// Optimizer state for one [`Mlp`] plus an optional extra flat parameter
/// block (the policy log-stddev vector rides along with the actor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stepper {
    pub rule: StepRule,
    pub decay: f64,
    pub eps: f64,
    mean_sq: Mlp,
    mean_sq_extra: Vec<f64>,
}

impl Stepper {
    pub fn new(rule: StepRule, shape: &Mlp, extra_len: usize) -> Self {
        Self {
            rule,
            decay: 0.99,
            eps: 1.0e-8,
            mean_sq: shape.zeros_like(),
            mean_sq_extra: vec![0.0; extra_len],
        }
    }

    /// Apply one step `params += sign * lr * scaled(grad)`; `sign` is -1 for
    /// descent and +1 for ascent.
    pub fn step(&mut self, params: &mut Mlp, grad: &Mlp, lr: f64, sign: f64) {
        match self.rule {
            StepRule::Sgd => params.add_scaled(grad, sign * lr),
            StepRule::RmsProp => {
                for ((pl, gl), vl) in params
                    .layers
                    .iter_mut()
                    .zip(grad.layers.iter())
                    .zip(self.mean_sq.layers.iter_mut())
                {
                    for ((p, g), v) in pl
                        .weights
                        .iter_mut()
                        .chain(pl.biases.iter_mut())
                        .zip(gl.weights.iter().chain(gl.biases.iter()))
                        .zip(vl.weights.iter_mut().chain(vl.biases.iter_mut()))
                    {
                        *v = self.decay * *v + (1.0 - self.decay) * g * g;
                        *p += sign * lr * g / (v.sqrt() + self.eps);
                    }
                }
            }
        }
    }

    /// Same step rule for the extra flat block.
    pub fn step_extra(&mut self, params: &mut [f64], grad: &[f64], lr: f64, sign: f64) {
        match self.rule {
            StepRule::Sgd => {
                for (p, g) in params.iter_mut().zip(grad.iter()) {
                    *p += sign * lr * g;
                }
            }
            StepRule::RmsProp => {
                for ((p, g), v) in params
                    .iter_mut()
                    .zip(grad.iter())
                    .zip(self.mean_sq_extra.iter_mut())
                {
                    *v = self.decay * *v + (1.0 - self.decay) * g * g;
                    *p += sign * lr * g / (v.sqrt() + self.eps);
                }
            }
        }
    }
}
