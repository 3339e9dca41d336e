//! Minimal differentiable-function toolkit: multilayer perceptrons with
//! exact reverse-mode gradients and an Adam update rule. Tanh on hidden
//! layers, identity on the output; everything lives in one flat f64
//! parameter vector so optimizers and checkpoints stay trivial.

use std::io::{Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::Rng;

use crate::error::Error;
use crate::Result;

/// Fully-connected network over a flat parameter vector.
///
/// Per layer the layout is the weight matrix in row-major order
/// (`w[out * fan_in + in]`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Cached per-layer activations from [`Mlp::forward_cached`]; required by
/// the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l]` the post-activation output of layer
    /// `l-1`, so `acts.last()` is the network output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache always holds the input")
    }
}

impl Mlp {
    /// Seeded init: weights and biases uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(layer_sizes: &[usize], rng: &mut StdRng) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output widths");
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_out * fan_in + fan_out {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params,
        }
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Scales the final layer's weights and bias; used to start policies
    /// near-uniform.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last_in = self.layer_sizes[self.layer_sizes.len() - 2];
        let last_out = *self.layer_sizes.last().unwrap();
        let tail = last_in * last_out + last_out;
        let start = self.params.len() - tail;
        for p in &mut self.params[start..] {
            *p *= factor;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).acts.pop().unwrap()
    }

    /// Forward pass keeping every layer's output for the backward pass.
    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(
            x.len(),
            self.input_dim(),
            "input width {} does not match network input {}",
            x.len(),
            self.input_dim()
        );
        let n_layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_out * fan_in];
            let biases = &self.params[offset + fan_out * fan_in..offset + fan_out * fan_in + fan_out];
            offset += fan_out * fan_in + fan_out;
            let input = acts.last().unwrap();
            let mut out = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = biases[o];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                out.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
            acts.push(out);
        }
        ForwardCache { acts }
    }

    /// Exact reverse-mode gradient of `upstream . forward(x)` with respect
    /// to every parameter, accumulated into `grad` (same layout as
    /// `params`).
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) {
        assert_eq!(upstream.len(), self.output_dim(), "upstream width mismatch");
        assert_eq!(grad.len(), self.params.len(), "gradient buffer mismatch");
        let n_layers = self.layer_sizes.len() - 1;
        let mut layer_offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.layer_sizes.windows(2) {
            layer_offsets.push(offset);
            offset += w[1] * w[0] + w[1];
        }

        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let base = layer_offsets[l];
            let input = &cache.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                let row = base + o * fan_in;
                for i in 0..fan_in {
                    grad[row + i] += d * input[i];
                }
                grad[base + fan_out * fan_in + o] += d;
            }
            if l > 0 {
                let weights = &self.params[base..base + fan_out * fan_in];
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                // input to this layer is a tanh output; tanh' = 1 - a^2
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }

    /// Convenience wrapper allocating the gradient buffer.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(cache, upstream, &mut grad);
        grad
    }

    /// Writes a small text header (layer sizes, seed) followed by the
    /// parameters as little-endian f64.
    pub fn save(&self, path: &Path, seed: u64) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        write!(
            file,
            "mlp\nlayers {}\nseed {}\nparams {}\n",
            sizes.join(" "),
            seed,
            self.params.len()
        )?;
        let mut bytes = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        file.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a file written by [`Mlp::save`]; returns the network and the
    /// recorded seed.
    pub fn load(path: &Path) -> Result<(Self, u64)> {
        let data = std::fs::read(path)?;
        let bad = |d: &str| Error::parse("mlp file", d.to_string());
        let mut header_end = 0;
        let mut newlines = 0;
        for (i, &b) in data.iter().enumerate() {
            if b == b'\n' {
                newlines += 1;
                if newlines == 4 {
                    header_end = i + 1;
                    break;
                }
            }
        }
        if newlines != 4 {
            return Err(bad("truncated header"));
        }
        let header = std::str::from_utf8(&data[..header_end]).map_err(|_| bad("non-utf8 header"))?;
        let mut lines = header.lines();
        if lines.next() != Some("mlp") {
            return Err(bad("missing magic"));
        }
        let layers_line = lines.next().ok_or_else(|| bad("missing layers"))?;
        let layer_sizes: Vec<usize> = layers_line
            .strip_prefix("layers ")
            .ok_or_else(|| bad("missing layers"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad layer size")))
            .collect::<Result<_>>()?;
        let seed: u64 = lines
            .next()
            .and_then(|l| l.strip_prefix("seed "))
            .ok_or_else(|| bad("missing seed"))?
            .parse()
            .map_err(|_| bad("bad seed"))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("params "))
            .ok_or_else(|| bad("missing params"))?
            .parse()
            .map_err(|_| bad("bad param count"))?;
        if count != param_count(&layer_sizes) {
            return Err(bad("param count does not match layer sizes"));
        }
        let mut body = &data[header_end..];
        if body.len() != count * 8 {
            return Err(bad("body length does not match param count"));
        }
        let mut params = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            body.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        Ok((Mlp { layer_sizes, params }, seed))
    }
}

/// Total parameter count for the given layer widths.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Bias-corrected Adam state for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update in place; `grads` is the gradient of the quantity being
    /// minimized.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
