//! Feed-forward multilayer perceptron with flat weight storage.
//!
//! Weights of layer `l` are stored neuron by neuron, each neuron as
//! `[bias, w_1, …, w_fan_in]`, layers concatenated in order. A network with
//! layer sizes `n, q_1, …, p` has `Σ (fan_in + 1) · fan_out` parameters.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::recoding::{BlockKind, OutputBlockSpec};

/// Pre-activations above this value are clamped before `exp`.
pub const EXP_CAP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    #[default]
    Tanh,
    Logistic,
    Exponential,
    Softmax,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies `kind` to `u`, writing into `out`. Returns true if the exponential cap bound.
fn apply_into(kind: Activation, u: &[f64], out: &mut [f64]) -> bool {
    let mut capped = false;
    match kind {
        Activation::Identity => out.copy_from_slice(u),
        Activation::Tanh => out.iter_mut().zip(u).for_each(|(o, &x)| *o = x.tanh()),
        Activation::Logistic => out.iter_mut().zip(u).for_each(|(o, &x)| *o = logistic(x)),
        Activation::Exponential => {
            for (o, &x) in out.iter_mut().zip(u) {
                if x > EXP_CAP {
                    capped = true;
                }
                *o = x.min(EXP_CAP).exp();
            }
        }
        Activation::Softmax => {
            let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &x) in out.iter_mut().zip(u) {
                *o = (x - max).exp();
                sum += *o;
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
    }
    capped
}

/// Applies an activation to a whole vector (softmax normalizes across it).
pub fn activation_apply(kind: Activation, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    apply_into(kind, u, &mut out);
    out
}

/// Pulls `grad_z = dL/dz` back through the activation, writing `dL/du`.
fn activation_backward(kind: Activation, u: &[f64], z: &[f64], grad_z: &[f64], grad_u: &mut [f64]) {
    match kind {
        Activation::Identity => grad_u.copy_from_slice(grad_z),
        Activation::Tanh => {
            for i in 0..z.len() {
                grad_u[i] = grad_z[i] * (1.0 - z[i] * z[i]);
            }
        }
        Activation::Logistic => {
            for i in 0..z.len() {
                grad_u[i] = grad_z[i] * z[i] * (1.0 - z[i]);
            }
        }
        Activation::Exponential => {
            for i in 0..z.len() {
                grad_u[i] = if u[i] > EXP_CAP { 0.0 } else { grad_z[i] * z[i] };
            }
        }
        Activation::Softmax => {
            let dot: f64 = z.iter().zip(grad_z).map(|(a, b)| a * b).sum();
            for i in 0..z.len() {
                grad_u[i] = z[i] * (grad_z[i] - dot);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub size: usize,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<HiddenLayer>,
    pub output_blocks: Vec<OutputBlockSpec>,
}

/// A slice of the output layer sharing one activation.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSegment {
    pub columns: Range<usize>,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<HiddenLayer>, output_blocks: Vec<OutputBlockSpec>) -> Result<Self> {
        let arch = MlpArchitecture {
            input_dim,
            hidden,
            output_blocks,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// One hidden layer of `q` neurons with activation `hidden`.
    pub fn single_hidden(input_dim: usize, q: usize, hidden: Activation, output_blocks: Vec<OutputBlockSpec>) -> Result<Self> {
        Self::new(
            input_dim,
            vec![HiddenLayer {
                size: q,
                activation: hidden,
            }],
            output_blocks,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Architecture("input dimension must be at least 1".into()));
        }
        if let Some(h) = self.hidden.iter().find(|h| h.size == 0) {
            return Err(Error::Architecture(format!("hidden layer of size {}", h.size)));
        }
        if self.output_blocks.is_empty() {
            return Err(Error::Architecture("no output blocks".into()));
        }
        let mut next = 0;
        for b in &self.output_blocks {
            if b.columns.start != next || b.columns.is_empty() {
                return Err(Error::Architecture(format!(
                    "output block `{}` does not continue the output partition at {next}",
                    b.source_variable
                )));
            }
            if let Some(w) = b.kind.fixed_width() {
                if b.len() != w {
                    return Err(Error::Architecture(format!(
                        "{:?} block `{}` must have width {w}",
                        b.kind, b.source_variable
                    )));
                }
            }
            next = b.columns.end;
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.output_blocks.last().map_or(0, |b| b.columns.end)
    }

    /// `[n, q_1, …, p]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend(self.hidden.iter().map(|h| h.size));
        sizes.push(self.output_dim());
        sizes
    }

    /// Number of weight layers (hidden layers plus the output layer).
    pub fn n_weight_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn output_segments(&self) -> Vec<OutputSegment> {
        let mut segs = Vec::new();
        for b in &self.output_blocks {
            let c = b.columns.clone();
            let seg = |columns: Range<usize>, activation| OutputSegment { columns, activation };
            match b.kind {
                BlockKind::LinearQuadratic | BlockKind::IntervalMeanLogLength => segs.push(seg(c, Activation::Identity)),
                BlockKind::IntervalMeanLength => {
                    segs.push(seg(c.start..c.start + 1, Activation::Identity));
                    segs.push(seg(c.start + 1..c.end, Activation::Exponential));
                }
                BlockKind::SoftmaxCrossEntropy | BlockKind::ModalSoftmax => segs.push(seg(c, Activation::Softmax)),
                BlockKind::LogisticIndependent => segs.push(seg(c, Activation::Logistic)),
            }
        }
        segs
    }

    pub fn layout(&self) -> WeightLayout {
        let sizes = self.layer_sizes();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for pair in sizes.windows(2) {
            offsets.push(total);
            total += (pair[0] + 1) * pair[1];
        }
        offsets.push(total);
        WeightLayout { sizes, offsets }
    }
}

/// Exact parameter count of an architecture.
pub fn count_weights(arch: &MlpArchitecture) -> usize {
    arch.layer_sizes().windows(2).map(|p| (p[0] + 1) * p[1]).sum()
}

/// Parameter count of a single-hidden-layer net `n → q → p`: `(n+1)q + (q+1)p`.
pub fn count_single_hidden(n: usize, q: usize, p: usize) -> usize {
    (n + 1) * q + (q + 1) * p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightInput {
    Bias,
    /// 0-based index of the neuron's input.
    From(usize),
}

/// Maps (layer, neuron, input) to positions in the flat weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl WeightLayout {
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn fan_in(&self, layer: usize) -> usize {
        self.sizes[layer]
    }

    pub fn fan_out(&self, layer: usize) -> usize {
        self.sizes[layer + 1]
    }

    /// Range of the flat vector holding layer `layer`.
    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn index(&self, layer: usize, neuron: usize, input: WeightInput) -> usize {
        let row = self.offsets[layer] + neuron * (self.fan_in(layer) + 1);
        match input {
            WeightInput::Bias => row,
            WeightInput::From(i) => row + 1 + i,
        }
    }

    pub fn is_bias(&self, position: usize) -> bool {
        let layer = (0..self.n_layers())
            .find(|&l| self.layer_range(l).contains(&position))
            .expect("position within the weight vector");
        (position - self.offsets[layer]).is_multiple_of(self.fan_in(layer) + 1)
    }
}

/// Uniform initialization in `[-r, r]`, `r = 1/√fan_in`, biases included.
pub fn init_weights<R: Rng + ?Sized>(arch: &MlpArchitecture, rng: &mut R) -> Vec<f64> {
    let layout = arch.layout();
    let mut w = Vec::with_capacity(layout.len());
    for l in 0..layout.n_layers() {
        let r = 1.0 / (layout.fan_in(l) as f64).sqrt();
        let count = layout.layer_range(l).len();
        w.extend((0..count).map(|_| rng.random_range(-r..=r)));
    }
    w
}

/// Pre- and post-activations of every weight layer for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
    /// Set when an exponential output saturated at [`EXP_CAP`].
    pub exp_capped: bool,
}

impl ActivationTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("at least one layer")
    }
}

fn affine(w: &[f64], fan_in: usize, z: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * (fan_in + 1)..(j + 1) * (fan_in + 1)];
        let mut s = row[0];
        for (wi, zi) in row[1..].iter().zip(z) {
            s += wi * zi;
        }
        *o = s;
    }
}

pub fn forward(arch: &MlpArchitecture, w: &[f64], x: &[f64]) -> Result<ActivationTrace> {
    let layout = arch.layout();
    check_len(layout.len(), w.len(), "weight vector")?;
    check_len(arch.input_dim, x.len(), "network input")?;
    let n_layers = layout.n_layers();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut exp_capped = false;
    for l in 0..n_layers {
        let z_prev = if l == 0 { x } else { &post[l - 1] };
        let mut u = vec![0.0; layout.fan_out(l)];
        affine(&w[layout.layer_range(l)], layout.fan_in(l), z_prev, &mut u);
        let mut z = vec![0.0; u.len()];
        if l + 1 < n_layers {
            exp_capped |= apply_into(arch.hidden[l].activation, &u, &mut z);
        } else {
            for seg in arch.output_segments() {
                let c = seg.columns.clone();
                exp_capped |= apply_into(seg.activation, &u[c.clone()], &mut z[c]);
            }
        }
        pre.push(u);
        post.push(z);
    }
    Ok(ActivationTrace {
        input: x.to_vec(),
        pre,
        post,
        exp_capped,
    })
}

/// Network output for one input.
pub fn predict(arch: &MlpArchitecture, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut trace = forward(arch, w, x)?;
    Ok(trace.post.pop().expect("at least one layer"))
}

/// Gradient of a scalar loss with respect to the weights, given the loss's
/// gradient with respect to the network outputs.
pub fn backward(arch: &MlpArchitecture, w: &[f64], trace: &ActivationTrace, output_gradient: &[f64]) -> Result<Vec<f64>> {
    let layout = arch.layout();
    let mut grad = vec![0.0; layout.len()];
    backward_accumulate(arch, &layout, w, trace, output_gradient, &mut grad)?;
    Ok(grad)
}

/// Adds the weight gradient for one example into `grad`.
pub(crate) fn backward_accumulate(
    arch: &MlpArchitecture,
    layout: &WeightLayout,
    w: &[f64],
    trace: &ActivationTrace,
    output_gradient: &[f64],
    grad: &mut [f64],
) -> Result<()> {
    check_len(layout.len(), w.len(), "weight vector")?;
    check_len(layout.len(), grad.len(), "gradient buffer")?;
    let n_layers = layout.n_layers();
    check_len(n_layers, trace.pre.len(), "activation trace layers")?;
    check_len(arch.output_dim(), output_gradient.len(), "output gradient")?;

    // delta = dL/dU for the current layer
    let last = n_layers - 1;
    let mut delta = vec![0.0; output_gradient.len()];
    for seg in arch.output_segments() {
        let c = seg.columns.clone();
        activation_backward(
            seg.activation,
            &trace.pre[last][c.clone()],
            &trace.post[last][c.clone()],
            &output_gradient[c.clone()],
            &mut delta[c],
        );
    }
    for l in (0..n_layers).rev() {
        let fan_in = layout.fan_in(l);
        let z_prev: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
        let range = layout.layer_range(l);
        let wl = &w[range.clone()];
        let gl = &mut grad[range];
        let mut grad_z_prev = vec![0.0; fan_in];
        for (j, &d) in delta.iter().enumerate() {
            let row = j * (fan_in + 1);
            gl[row] += d;
            for i in 0..fan_in {
                gl[row + 1 + i] += d * z_prev[i];
                grad_z_prev[i] += d * wl[row + 1 + i];
            }
        }
        if l > 0 {
            let mut next = vec![0.0; fan_in];
            activation_backward(
                arch.hidden[l - 1].activation,
                &trace.pre[l - 1],
                &trace.post[l - 1],
                &grad_z_prev,
                &mut next,
            );
            delta = next;
        }
    }
    Ok(())
}

/// An architecture with its weights, as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedNetwork {
    pub architecture: MlpArchitecture,
    pub weights: Vec<f64>,
}

impl SavedNetwork {
    pub fn new(architecture: MlpArchitecture, weights: Vec<f64>) -> Result<Self> {
        check_len(count_weights(&architecture), weights.len(), "saved weights")?;
        Ok(SavedNetwork { architecture, weights })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("networks always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: SavedNetwork = serde_json::from_str(s)?;
        net.architecture.validate()?;
        Self::new(net.architecture, net.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_block(p: usize) -> Vec<OutputBlockSpec> {
        (0..p)
            .map(|i| OutputBlockSpec::new(format!("y{i}"), i..i + 1, BlockKind::LinearQuadratic))
            .collect()
    }

    #[test]
    fn softmax_examples() {
        let s = activation_apply(Activation::Softmax, &[0.0, 0.0, 0.0]);
        for v in s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = activation_apply(Activation::Softmax, &[2f64.ln(), 0.0]);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(activation_apply(Activation::Logistic, &[0.0]), vec![0.5]);
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let s = activation_apply(Activation::Softmax, &[1000.0, 999.0]);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_is_capped() {
        let mut out = [0.0];
        assert!(apply_into(Activation::Exponential, &[100.0], &mut out));
        assert_eq!(out[0], EXP_CAP.exp());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let arch = MlpArchitecture::single_hidden(3, 4, Activation::Tanh, linear_block(2)).unwrap();
        let w = vec![0.0; count_weights(&arch)];
        assert_eq!(predict(&arch, &w, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_logistic_neuron_at_zero() {
        let arch = MlpArchitecture::new(
            1,
            vec![],
            vec![OutputBlockSpec::new("y", 0..1, BlockKind::LogisticIndependent)],
        )
        .unwrap();
        assert_eq!(predict(&arch, &[0.0, 0.0], &[42.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn two_one_one_net_by_hand() {
        // hidden: z = tanh(0.1 + 0.2 x1 - 0.3 x2); output: y = -0.4 + 0.5 z
        let arch = MlpArchitecture::single_hidden(2, 1, Activation::Tanh, linear_block(1)).unwrap();
        let w = [0.1, 0.2, -0.3, -0.4, 0.5];
        let x = [1.5, -2.0];
        let z = (0.1f64 + 0.2 * 1.5 + 0.3 * 2.0).tanh();
        let expected = -0.4 + 0.5 * z;
        let out = predict(&arch, &w, &x).unwrap();
        assert!((out[0] - expected).abs() < 1e-15);
        // tanh(1.0) = 0.7615941559557649
        assert!((out[0] - (-0.4 + 0.5 * 0.761_594_155_955_764_9)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let arch = MlpArchitecture::single_hidden(2, 1, Activation::Tanh, linear_block(1)).unwrap();
        assert!(forward(&arch, &[0.0; 5], &[1.0]).is_err());
        assert!(forward(&arch, &[0.0; 4], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_weight_gradient() {
        let arch = MlpArchitecture::single_hidden(2, 3, Activation::Tanh, linear_block(2)).unwrap();
        let w: Vec<f64> = (0..count_weights(&arch)).map(|i| (i as f64 * 0.37).sin()).collect();
        let trace = forward(&arch, &w, &[0.3, -0.7]).unwrap();
        let g = backward(&arch, &w, &trace, &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_neuron_quadratic_gradient() {
        // L = (w x + b - y)^2 at x=1, y=0, b=0, w=1: dL/db = dL/dw = 2.
        let arch = MlpArchitecture::new(1, vec![], linear_block(1)).unwrap();
        let w = [0.0, 1.0];
        let trace = forward(&arch, &w, &[1.0]).unwrap();
        let t = trace.output()[0];
        let g = backward(&arch, &w, &trace, &[2.0 * (t - 0.0)]).unwrap();
        assert_eq!(g, vec![2.0, 2.0]);
    }

    #[test]
    fn weight_counts_match_layout() {
        let arch = MlpArchitecture::new(
            4,
            vec![
                HiddenLayer {
                    size: 5,
                    activation: Activation::Tanh,
                },
                HiddenLayer {
                    size: 3,
                    activation: Activation::Logistic,
                },
            ],
            linear_block(2),
        )
        .unwrap();
        assert_eq!(count_weights(&arch), 5 * 5 + 6 * 3 + 4 * 2);
        assert_eq!(arch.layout().len(), count_weights(&arch));
        let layout = arch.layout();
        assert_eq!(layout.index(1, 2, WeightInput::Bias), 25 + 2 * 6);
        assert!(layout.is_bias(25 + 12));
        assert!(!layout.is_bias(25 + 13));
    }

    #[test]
    fn table_one_counts() {
        assert_eq!(count_single_hidden(24, 3, 1) + count_single_hidden(24, 30, 1), 860);
        assert_eq!(count_single_hidden(2, 30, 1) + count_single_hidden(2, 17, 1), 190);
        assert_eq!(count_single_hidden(4, 20, 1) + count_single_hidden(4, 25, 1), 272);
        assert_eq!(count_single_hidden(4, 25, 1) + count_single_hidden(4, 40, 1), 392);
    }

    #[test]
    fn saved_network_round_trip_is_bit_exact() {
        let arch = MlpArchitecture::single_hidden(2, 2, Activation::Tanh, linear_block(1)).unwrap();
        let w = vec![0.1, 1.0 / 3.0, -2.0f64.sqrt(), 1e-300, std::f64::consts::PI, -0.0, 7.0e22, 5e-324, 0.7];
        let saved = SavedNetwork::new(arch, w.clone()).unwrap();
        let back = SavedNetwork::from_json(&saved.to_json()).unwrap();
        for (a, b) in back.weights.iter().zip(&w) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
