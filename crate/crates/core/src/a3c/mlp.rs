//! Fully connected tanh networks with a flat parameter vector.
//!
//! Layer `l` maps `dims[l]` inputs to `dims[l + 1]` outputs. Its weights are
//! stored row-major (`outputs x inputs`) followed by the bias, and layers are
//! laid out back to back. Every layer except the last applies `tanh`.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Output interpretation of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// Logits fed to a softmax (policy network).
    Softmax,
    /// Raw scalar (value network).
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    head: Head,
    params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(dims: &[usize], head: Head) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least an input and an output width");
        Self { dims: dims.to_vec(), head, params: vec![0.0; param_count(dims)] }
    }

    /// Glorot-uniform weights and zero biases; the last layer is multiplied by
    /// `output_scale`.
    pub fn random(dims: &[usize], head: Head, output_scale: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(dims, head);
        let last = dims.len() - 2;
        let mut offset = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let scale = if l == last { output_scale } else { 1.0 };
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = scale * limit * (2.0 * rng.random::<f64>() - 1.0);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(dims: &[usize], head: Head, params: Vec<f64>) -> Option<Self> {
        (dims.len() >= 2 && params.len() == param_count(dims)).then(|| Self {
            dims: dims.to_vec(),
            head,
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let n_layers = self.dims.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &activations[l];
            let mut y: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(y);
            offset += n_in * n_out + n_out;
        }
        ForwardCache { activations }
    }

    /// Accumulates `d loss / d params` into `grad`, given `d loss / d output`
    /// of the last (pre-head) layer.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.dims.len() - 1;
        let mut delta = d_output.to_vec();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut o = 0;
        for w in self.dims.windows(2) {
            offsets.push(o);
            o += w[0] * w[1] + w[1];
        }
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let offset = offsets[l];
            let x = &cache.activations[l];
            {
                let (gw, rest) = grad[offset..].split_at_mut(n_in * n_out);
                for (r, d) in delta.iter().enumerate() {
                    for (g, xi) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
                for (g, d) in rest[..n_out].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            if l > 0 {
                let weights = &self.params[offset..offset + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (r, d) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(&weights[r * n_in..(r + 1) * n_in]) {
                        *p += d * w;
                    }
                }
                // Previous layer output went through tanh: derivative 1 - y^2.
                for (p, y) in prev.iter_mut().zip(x) {
                    *p *= 1.0 - y * y;
                }
                delta = prev;
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_layout() {
        assert_eq!(param_count(&[6, 64, 64, 3]), 6 * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3);
        let net = Mlp::zeros(&[3, 4, 2], Head::Linear);
        assert_eq!(net.params().len(), 3 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn zero_net_outputs_bias() {
        let mut net = Mlp::zeros(&[2, 3, 1], Head::Linear);
        let n = net.params().len();
        net.params_mut()[n - 1] = 0.75;
        assert_eq!(net.forward(&[0.3, -0.2]).output(), &[0.75]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(&[4, 5, 3, 2], Head::Linear, 1.0, &mut rng);
        let x = [0.2, -0.4, 0.9, 0.1];
        // loss = 0.7 y0 - 1.3 y1
        let coef = [0.7, -1.3];
        let loss = |n: &Mlp| n.forward(&x).output().iter().zip(&coef).map(|(y, c)| y * c).sum::<f64>();
        let mut grad = vec![0.0; net.params().len()];
        net.backward(&net.forward(&x), &coef, &mut grad);
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = loss(&p);
            p.params_mut()[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn softmax_is_normalized_and_stable() {
        let p = softmax(&[1000.0, 1000.0, 999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x > 0.0));
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
    }
}
