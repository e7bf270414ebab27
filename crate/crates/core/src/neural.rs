//! Small feedforward networks with exact reverse-mode gradients and Adam.
//!
//! Everything is plain f64 on flat slices. The forward pass caches layer
//! activations so a following backward pass can accumulate parameter
//! gradients in closed form, which keeps the finite-difference gradient
//! check meaningful.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::textfmt::fmt_f64;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("backward called without a cached forward pass")]
    BackwardBeforeForward,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("checkpoint parse error at line {line}: {message}")]
    CheckpointParse { line: usize, message: String },
    #[error("checkpoint I/O error: {0}")]
    CheckpointIo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Softmax,
}

/// Numerically stable log-softmax via max subtraction.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - max - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).iter().map(|lp| lp.exp()).collect()
}

/// A dense feedforward network. Layer `l` maps `sizes[l] -> sizes[l+1]`
/// with weights stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    grad_weights: Vec<Vec<f64>>,
    grad_biases: Vec<Vec<f64>>,
    hidden: HiddenActivation,
    output: OutputActivation,
    /// Input, each hidden post-activation, and the final-layer logits.
    cache: Option<Vec<Vec<f64>>>,
}

impl Mlp {
    /// Builds a network with seeded uniform init: He bounds for ReLU,
    /// Xavier bounds for Tanh. Biases start at zero.
    pub fn new(
        sizes: &[usize],
        hidden: HiddenActivation,
        output: OutputActivation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NetError::InvalidArchitecture(format!(
                "need at least two non-zero layer sizes, got {sizes:?}"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = match hidden {
                HiddenActivation::Relu => (6.0 / fan_in as f64).sqrt(),
                HiddenActivation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        let grad_weights = weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let grad_biases = biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            grad_weights,
            grad_biases,
            hidden,
            output,
            cache: None,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.weights[l];
        let mut out = self.biases[l].clone();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = 0.0;
            for (wij, xj) in row.iter().zip(x) {
                acc += wij * xj;
            }
            *o += acc;
        }
        let _ = n_out;
        out
    }

    /// Forward pass up to the final affine layer, caching activations.
    pub fn forward_logits(&mut self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.sizes[0] {
            return Err(NetError::Shape { expected: self.sizes[0], got: x.len() });
        }
        let n_layers = self.sizes.len() - 1;
        let mut cache = Vec::with_capacity(n_layers + 1);
        cache.push(x.to_vec());
        let mut a = x.to_vec();
        for l in 0..n_layers {
            let mut z = self.affine(l, &a);
            if l + 1 < n_layers {
                match self.hidden {
                    HiddenActivation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                    HiddenActivation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                }
            }
            cache.push(z.clone());
            a = z;
        }
        self.cache = Some(cache);
        Ok(a)
    }

    /// Full forward pass including the output activation.
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        let logits = self.forward_logits(x)?;
        Ok(match self.output {
            OutputActivation::Linear => logits,
            OutputActivation::Softmax => softmax(&logits),
        })
    }

    /// Accumulates parameter gradients for dL/d(output).
    pub fn backward(&mut self, grad_output: &[f64]) -> Result<(), NetError> {
        let out_dim = self.output_dim();
        if grad_output.len() != out_dim {
            return Err(NetError::Shape { expected: out_dim, got: grad_output.len() });
        }
        let grad_logits = match self.output {
            OutputActivation::Linear => grad_output.to_vec(),
            OutputActivation::Softmax => {
                let logits = self
                    .cache
                    .as_ref()
                    .ok_or(NetError::BackwardBeforeForward)?
                    .last()
                    .unwrap();
                let y = softmax(logits);
                let dot: f64 = grad_output.iter().zip(&y).map(|(g, yi)| g * yi).sum();
                y.iter().zip(grad_output).map(|(yi, g)| yi * (g - dot)).collect()
            }
        };
        self.backward_from_logits(&grad_logits)
    }

    /// Accumulates parameter gradients for dL/d(logits), skipping the output
    /// activation. This is the stable path for fused softmax losses.
    pub fn backward_from_logits(&mut self, grad_logits: &[f64]) -> Result<(), NetError> {
        let out_dim = self.output_dim();
        if grad_logits.len() != out_dim {
            return Err(NetError::Shape { expected: out_dim, got: grad_logits.len() });
        }
        let cache = self.cache.as_ref().ok_or(NetError::BackwardBeforeForward)?;
        let n_layers = self.sizes.len() - 1;
        let mut delta = grad_logits.to_vec();
        for l in (0..n_layers).rev() {
            let a_prev = &cache[l];
            let n_in = self.sizes[l];
            {
                let gw = &mut self.grad_weights[l];
                let gb = &mut self.grad_biases[l];
                for (i, &d) in delta.iter().enumerate() {
                    gb[i] += d;
                    let row = &mut gw[i * n_in..(i + 1) * n_in];
                    for (g, &a) in row.iter_mut().zip(a_prev) {
                        *g += d * a;
                    }
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut prev = vec![0.0; n_in];
                for (i, &d) in delta.iter().enumerate() {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    for (p, &wij) in prev.iter_mut().zip(row) {
                        *p += d * wij;
                    }
                }
                // Activation derivative from the cached post-activation.
                match self.hidden {
                    HiddenActivation::Tanh => {
                        for (p, &a) in prev.iter_mut().zip(a_prev) {
                            *p *= 1.0 - a * a;
                        }
                    }
                    HiddenActivation::Relu => {
                        for (p, &a) in prev.iter_mut().zip(a_prev) {
                            if a <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad_weights.iter_mut().chain(self.grad_biases.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter indexing: all weight matrices row-major, then all biases.
    pub fn get_param(&self, index: usize) -> f64 {
        let mut i = index;
        for w in &self.weights {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
        }
        for b in &self.biases {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut i = index;
        for w in &mut self.weights {
            if i < w.len() {
                w[i] = value;
                return;
            }
            i -= w.len();
        }
        for b in &mut self.biases {
            if i < b.len() {
                b[i] = value;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Flat gradient read in the same ordering as [`Mlp::get_param`].
    pub fn get_grad(&self, index: usize) -> f64 {
        let mut i = index;
        for g in &self.grad_weights {
            if i < g.len() {
                return g[i];
            }
            i -= g.len();
        }
        for g in &self.grad_biases {
            if i < g.len() {
                return g[i];
            }
            i -= g.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Flat text checkpoint: `mlp <n_sizes> <sizes...>` then per layer one
    /// row-major weight line and one bias line.
    pub fn checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "mlp {}", self.sizes.len());
        for s in &self.sizes {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        for (w, b) in self.weights.iter().zip(&self.biases) {
            push_f64_line(&mut out, w);
            push_f64_line(&mut out, b);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.checkpoint()).map_err(|e| NetError::CheckpointIo(e.to_string()))
    }

    /// Parses a checkpoint written by [`Mlp::checkpoint`]. Activations are
    /// not part of the format and must be supplied.
    pub fn from_checkpoint(
        text: &str,
        hidden: HiddenActivation,
        output: OutputActivation,
    ) -> Result<Self, NetError> {
        let parse_err =
            |line: usize, message: &str| NetError::CheckpointParse { line, message: message.into() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty checkpoint"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 2 || fields[0] != "mlp" {
            return Err(parse_err(1, "expected header `mlp <n> <sizes...>`"));
        }
        let n: usize = fields[1].parse().map_err(|_| parse_err(1, "bad size count"))?;
        if fields.len() != 2 + n {
            return Err(parse_err(1, "size count does not match header"));
        }
        let sizes: Vec<usize> = fields[2..]
            .iter()
            .map(|f| f.parse::<usize>().map_err(|_| parse_err(1, "bad layer size")))
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(parse_err(1, "invalid layer sizes"));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let expect_w = sizes[l] * sizes[l + 1];
            let (idx, line) = lines
                .next()
                .ok_or_else(|| parse_err(l * 2 + 2, "missing weight line"))?;
            let w = parse_f64_line(line, expect_w).map_err(|m| parse_err(idx + 1, &m))?;
            let (idx, line) = lines
                .next()
                .ok_or_else(|| parse_err(l * 2 + 3, "missing bias line"))?;
            let b = parse_f64_line(line, sizes[l + 1]).map_err(|m| parse_err(idx + 1, &m))?;
            weights.push(w);
            biases.push(b);
        }
        let grad_weights = weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let grad_biases = biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Ok(Mlp {
            sizes,
            weights,
            biases,
            grad_weights,
            grad_biases,
            hidden,
            output,
            cache: None,
        })
    }

    pub fn load(
        path: &Path,
        hidden: HiddenActivation,
        output: OutputActivation,
    ) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path).map_err(|e| NetError::CheckpointIo(e.to_string()))?;
        Self::from_checkpoint(&text, hidden, output)
    }
}

fn push_f64_line(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*v));
        first = false;
    }
    out.push('\n');
}

fn parse_f64_line(line: &str, expected: usize) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| format!("bad float `{tok}`")))
        .collect::<Result<_, _>>()?;
    if values.len() != expected {
        return Err(format!("expected {expected} values, got {}", values.len()));
    }
    Ok(values)
}

/// Bias-corrected Adam over one network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update from the accumulated gradients; zeroes them after.
    pub fn step(&mut self, net: &mut Mlp) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let update = |theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        };
        for l in 0..net.weights.len() {
            update(
                &mut net.weights[l],
                &net.grad_weights[l],
                &mut self.m_weights[l],
                &mut self.v_weights[l],
            );
            update(
                &mut net.biases[l],
                &net.grad_biases[l],
                &mut self.m_biases[l],
                &mut self.v_biases[l],
            );
        }
        net.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn rng(seed: u64) -> ChaCha8Rng {
        stream_rng(seed, Stream::PolicyInit)
    }

    fn zeroed(sizes: &[usize], hidden: HiddenActivation, output: OutputActivation) -> Mlp {
        let mut net = Mlp::new(sizes, hidden, output, &mut rng(0)).unwrap();
        for i in 0..net.n_params() {
            net.set_param(i, 0.0);
        }
        net
    }

    #[test]
    fn zero_net_linear_outputs_zero() {
        let mut net = zeroed(&[3, 4, 2], HiddenActivation::Tanh, OutputActivation::Linear);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_net_softmax_is_uniform() {
        let mut net = zeroed(&[3, 4, 5], HiddenActivation::Tanh, OutputActivation::Softmax);
        let y = net.forward(&[0.3, 0.1, 0.9]).unwrap();
        for v in y {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_passthrough() {
        let mut net = zeroed(&[1, 1], HiddenActivation::Tanh, OutputActivation::Linear);
        net.set_param(0, 1.0); // single weight
        assert_eq!(net.forward(&[0.73]).unwrap(), vec![0.73]);
    }

    #[test]
    fn scalar_chain_rule() {
        // y = w * x with x = 2: upstream grad 1 gives dL/dw = 2.
        let mut net = zeroed(&[1, 1], HiddenActivation::Tanh, OutputActivation::Linear);
        net.set_param(0, 3.0);
        net.forward(&[2.0]).unwrap();
        net.backward(&[1.0]).unwrap();
        assert_eq!(net.get_grad(0), 2.0);
    }

    #[test]
    fn zero_upstream_gradient_zeroes_all() {
        let mut net = Mlp::new(&[4, 3, 2], HiddenActivation::Relu, OutputActivation::Linear, &mut rng(1)).unwrap();
        net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        net.backward(&[0.0, 0.0]).unwrap();
        for i in 0..net.n_params() {
            assert_eq!(net.get_grad(i), 0.0);
        }
    }

    #[test]
    fn backward_before_forward_errors() {
        let mut net = Mlp::new(&[2, 2], HiddenActivation::Tanh, OutputActivation::Linear, &mut rng(2)).unwrap();
        assert_eq!(net.backward(&[1.0, 1.0]), Err(NetError::BackwardBeforeForward));
    }

    /// Central finite differences of `loss` over every parameter.
    fn fd_gradients(net: &mut Mlp, x: &[f64], coeffs: &[f64], h: f64) -> Vec<f64> {
        let mut grads = Vec::with_capacity(net.n_params());
        for i in 0..net.n_params() {
            let orig = net.get_param(i);
            net.set_param(i, orig + h);
            let plus: f64 = net.forward(x).unwrap().iter().zip(coeffs).map(|(y, c)| y * c).sum();
            net.set_param(i, orig - h);
            let minus: f64 = net.forward(x).unwrap().iter().zip(coeffs).map(|(y, c)| y * c).sum();
            net.set_param(i, orig);
            grads.push((plus - minus) / (2.0 * h));
        }
        grads
    }

    fn max_rel_error(net: &mut Mlp, seed: u64) -> f64 {
        let mut r = stream_rng(seed, Stream::Sampling);
        let x: Vec<f64> = (0..net.input_dim()).map(|_| r.random_range(0.0..1.0)).collect();
        let coeffs: Vec<f64> = (0..net.output_dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        net.forward(&x).unwrap();
        net.zero_grad();
        net.backward(&coeffs).unwrap();
        let fd = fd_gradients(net, &x, &coeffs, 1e-5);
        (0..net.n_params())
            .map(|i| {
                let (a, b) = (net.get_grad(i), fd[i]);
                (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradcheck_all_activation_output_combos() {
        for seed in 0..5 {
            for hidden in [HiddenActivation::Tanh, HiddenActivation::Relu] {
                for output in [OutputActivation::Linear, OutputActivation::Softmax] {
                    let mut net = Mlp::new(&[6, 7, 4], hidden, output, &mut rng(seed)).unwrap();
                    let err = max_rel_error(&mut net, seed + 100);
                    assert!(err < 1e-4, "{hidden:?}/{output:?} seed {seed}: rel err {err}");
                }
            }
        }
    }

    #[test]
    fn gradcheck_wide_net() {
        let mut net =
            Mlp::new(&[200, 16, 5], HiddenActivation::Tanh, OutputActivation::Softmax, &mut rng(7)).unwrap();
        let err = max_rel_error(&mut net, 7);
        assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn log_softmax_finite_for_huge_logits() {
        let lp = log_softmax(&[1e3, -1e3, 0.0, 999.0, -999.0]);
        assert!(lp.iter().all(|v| v.is_finite()));
        let y = softmax(&[3.0, -1.0, 0.5, 0.0, 2.0]);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(y.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn adam_zero_gradients_leave_parameters() {
        let mut net = Mlp::new(&[3, 3], HiddenActivation::Tanh, OutputActivation::Linear, &mut rng(3)).unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net, 0.01);
        adam.step(&mut net);
        assert_eq!(net.weights, before.weights);
        assert_eq!(net.biases, before.biases);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut net = zeroed(&[1, 1], HiddenActivation::Tanh, OutputActivation::Linear);
        net.set_param(0, 0.5);
        let mut adam = AdamState::new(&net, 0.001);
        net.forward(&[1.0]).unwrap();
        net.backward(&[1.0]).unwrap(); // grad = 1
        adam.step(&mut net);
        let moved = 0.5 - net.get_param(0);
        assert!((moved - 0.001).abs() < 1e-8, "moved {moved}");
    }

    #[test]
    fn adam_is_deterministic() {
        let build = || {
            let mut net = Mlp::new(&[4, 3, 2], HiddenActivation::Relu, OutputActivation::Linear, &mut rng(4)).unwrap();
            let mut adam = AdamState::new(&net, 0.01);
            for k in 0..10 {
                net.forward(&[0.1 * k as f64, 0.2, -0.3, 0.4]).unwrap();
                net.backward(&[1.0, -0.5]).unwrap();
                adam.step(&mut net);
            }
            net
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn seeded_init_is_bitwise_identical() {
        let a = Mlp::new(&[5, 4, 3], HiddenActivation::Tanh, OutputActivation::Softmax, &mut rng(9)).unwrap();
        let b = Mlp::new(&[5, 4, 3], HiddenActivation::Tanh, OutputActivation::Softmax, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let net = Mlp::new(&[4, 6, 2], HiddenActivation::Relu, OutputActivation::Linear, &mut rng(5)).unwrap();
        let restored =
            Mlp::from_checkpoint(&net.checkpoint(), HiddenActivation::Relu, OutputActivation::Linear).unwrap();
        assert_eq!(net, restored);
    }

    #[test]
    fn checkpoint_parse_error_names_line() {
        let text = "mlp 2 2 1\n0.5 oops\n0.0\n";
        match Mlp::from_checkpoint(text, HiddenActivation::Tanh, OutputActivation::Linear) {
            Err(NetError::CheckpointParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
