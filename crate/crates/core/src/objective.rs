//! Per-block losses, the composite loss and the regularized empirical error.
//!
//! The regularized error of weights `w` on `N` examples is
//!
//! ```text
//! R(w) = (1/N) Σ_i Σ_b β_b d_b(y_i, H(x_i, w)) + Σ_j (λ_layer(j) / m_j) w_j²
//! ```
//!
//! where `β_b` are block weights, biases are not penalized and `m_j` is the
//! category count of the input group feeding first-layer weight `j` (1 for
//! non-categorical groups and for deeper layers).

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mlp::{backward_accumulate, forward, MlpArchitecture};
use crate::recoding::{BlockKind, OutputBlockSpec};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// d(loss)/d(t)
    pub gradient: Vec<f64>,
}

/// `Σ (t_i − y_i)²`.
pub fn quadratic_loss(y: &[f64], t: &[f64]) -> Result<LossValue> {
    check_len(y.len(), t.len(), "quadratic loss")?;
    let mut value = 0.0;
    let gradient = y
        .iter()
        .zip(t)
        .map(|(&yi, &ti)| {
            let r = ti - yi;
            value += r * r;
            2.0 * r
        })
        .collect();
    Ok(LossValue { value, gradient })
}

fn neg_log_terms(y: &[f64], t: &[f64], weight: f64) -> LossValue {
    let mut value = 0.0;
    let gradient = y
        .iter()
        .zip(t)
        .map(|(&yi, &ti)| {
            if yi == 0.0 {
                return 0.0;
            }
            if ti > PROB_FLOOR {
                value -= weight * yi * ti.ln();
                -weight * yi / ti
            } else {
                value -= weight * yi * PROB_FLOOR.ln();
                0.0
            }
        })
        .collect();
    LossValue { value, gradient }
}

/// `−Σ y_i ln t_i` with `t_i` floored at [`PROB_FLOOR`].
pub fn cross_entropy_loss(y: &[f64], t: &[f64]) -> Result<LossValue> {
    check_len(y.len(), t.len(), "cross-entropy loss")?;
    Ok(neg_log_terms(y, t, 1.0))
}

/// Likelihood `Π T_i^{Y_i}` over independently modelled categories, i.e.
/// `−Σ y_i ln t_i`. Absent categories contribute nothing.
pub fn independent_cross_entropy_loss(y: &[f64], t: &[f64]) -> Result<LossValue> {
    check_len(y.len(), t.len(), "independent cross-entropy loss")?;
    Ok(neg_log_terms(y, t, 1.0))
}

/// `−Σ [y_i ln t_i + (1 − y_i) ln(1 − t_i)]`.
pub fn bernoulli_cross_entropy_loss(y: &[f64], t: &[f64]) -> Result<LossValue> {
    check_len(y.len(), t.len(), "Bernoulli cross-entropy loss")?;
    let present = neg_log_terms(y, t, 1.0);
    let y_c: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let t_c: Vec<f64> = t.iter().map(|v| 1.0 - v).collect();
    let absent = neg_log_terms(&y_c, &t_c, 1.0);
    Ok(LossValue {
        value: present.value + absent.value,
        gradient: present
            .gradient
            .iter()
            .zip(&absent.gradient)
            .map(|(a, b)| a - b)
            .collect(),
    })
}

/// `−l Σ p_i ln t_i`: multinomial negative log-likelihood of `l` micro-observations.
pub fn weighted_multinomial_loss(p: &[f64], t: &[f64], l: f64) -> Result<LossValue> {
    check_len(p.len(), t.len(), "multinomial loss")?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Config(format!("micro-observation weight must be positive, got {l}")));
    }
    Ok(neg_log_terms(p, t, l))
}

/// Loss of one block; `micro_count` only matters for micro-weighted modal blocks.
pub fn block_loss(block: &OutputBlockSpec, y: &[f64], t: &[f64], micro_count: f64) -> Result<LossValue> {
    check_len(block.len(), y.len(), "block target")?;
    check_len(block.len(), t.len(), "block output")?;
    match block.kind {
        BlockKind::LinearQuadratic | BlockKind::IntervalMeanLength | BlockKind::IntervalMeanLogLength => {
            quadratic_loss(y, t)
        }
        BlockKind::SoftmaxCrossEntropy => cross_entropy_loss(y, t),
        BlockKind::LogisticIndependent if block.bernoulli => bernoulli_cross_entropy_loss(y, t),
        BlockKind::LogisticIndependent => independent_cross_entropy_loss(y, t),
        BlockKind::ModalSoftmax => {
            let l = if block.micro_weighted { micro_count } else { 1.0 };
            weighted_multinomial_loss(y, t, l)
        }
    }
}

/// One block's target and network output for a single example.
#[derive(Clone, Copy, Debug)]
pub struct BlockTarget<'a> {
    pub block: &'a OutputBlockSpec,
    pub y: &'a [f64],
    pub t: &'a [f64],
    pub micro_count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLossReport {
    /// Weighted loss of each block.
    pub per_block: Vec<f64>,
    /// Weighted gradient of each block with respect to its outputs.
    pub gradients: Vec<Vec<f64>>,
    pub penalty: f64,
    pub total: f64,
}

impl BlockLossReport {
    pub fn gradient(&self) -> Vec<f64> {
        self.gradients.concat()
    }
}

/// Weighted sum of per-block losses. `block_weights` empty means all ones.
pub fn composite_loss(blocks: &[BlockTarget<'_>], block_weights: &[f64]) -> Result<BlockLossReport> {
    if !block_weights.is_empty() {
        check_len(blocks.len(), block_weights.len(), "block weights")?;
    }
    let mut per_block = Vec::with_capacity(blocks.len());
    let mut gradients = Vec::with_capacity(blocks.len());
    for (b, target) in blocks.iter().enumerate() {
        let beta = block_weights.get(b).copied().unwrap_or(1.0);
        let loss = block_loss(target.block, target.y, target.t, target.micro_count)?;
        per_block.push(beta * loss.value);
        gradients.push(loss.gradient.into_iter().map(|g| beta * g).collect());
    }
    let total = per_block.iter().sum();
    Ok(BlockLossReport {
        per_block,
        gradients,
        penalty: 0.0,
        total,
    })
}

/// Numeric examples: standardized inputs, encoded targets and per-block
/// micro-observation counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub n_blocks: usize,
    /// `n × n_blocks`, 1 where no count is known.
    pub micro_counts: Vec<f64>,
    /// Decay divisor of each input column.
    pub input_divisors: Vec<f64>,
}

impl Dataset {
    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>], n_blocks: usize) -> Result<Self> {
        check_len(inputs.len(), targets.len(), "dataset rows")?;
        let input_dim = inputs.first().map_or(0, Vec::len);
        let output_dim = targets.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(inputs.len() * input_dim);
        let mut y = Vec::with_capacity(targets.len() * output_dim);
        for (xi, yi) in inputs.iter().zip(targets) {
            check_len(input_dim, xi.len(), "input row")?;
            check_len(output_dim, yi.len(), "target row")?;
            x.extend_from_slice(xi);
            y.extend_from_slice(yi);
        }
        Self::from_flat(inputs.len(), input_dim, output_dim, x, y, n_blocks)
    }

    pub fn from_flat(n: usize, input_dim: usize, output_dim: usize, inputs: Vec<f64>, targets: Vec<f64>, n_blocks: usize) -> Result<Self> {
        check_len(n * input_dim, inputs.len(), "dataset inputs")?;
        check_len(n * output_dim, targets.len(), "dataset targets")?;
        Ok(Dataset {
            n,
            input_dim,
            output_dim,
            inputs,
            targets,
            n_blocks,
            micro_counts: vec![1.0; n * n_blocks],
            input_divisors: vec![1.0; input_dim],
        })
    }

    pub fn with_input_divisors(mut self, divisors: Vec<f64>) -> Result<Self> {
        check_len(self.input_dim, divisors.len(), "input divisors")?;
        if divisors.iter().any(|&d| !(d >= 1.0)) {
            return Err(Error::Config("decay divisors must be at least 1".into()));
        }
        self.input_divisors = divisors;
        Ok(self)
    }

    pub fn with_micro_counts(mut self, counts: Vec<f64>) -> Result<Self> {
        check_len(self.n * self.n_blocks, counts.len(), "micro counts")?;
        self.micro_counts = counts;
        Ok(self)
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn micro(&self, i: usize, block: usize) -> f64 {
        self.micro_counts[i * self.n_blocks + block]
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset {
            n: indices.len(),
            inputs: Vec::with_capacity(indices.len() * self.input_dim),
            targets: Vec::with_capacity(indices.len() * self.output_dim),
            micro_counts: Vec::with_capacity(indices.len() * self.n_blocks),
            ..self.clone()
        };
        for &i in indices {
            out.inputs.extend_from_slice(self.x(i));
            out.targets.extend_from_slice(self.y(i));
            out.micro_counts
                .extend_from_slice(&self.micro_counts[i * self.n_blocks..(i + 1) * self.n_blocks]);
        }
        out
    }

    /// Replaces inputs by `(x - mean) / scale`.
    pub fn standardize_inputs(&self, stats: &crate::recoding::ColumnStats) -> Result<Dataset> {
        check_len(self.input_dim, stats.n_cols(), "input standardizer")?;
        let mut out = self.clone();
        for i in 0..self.n {
            let z = stats.transform_row(self.x(i));
            out.inputs[i * self.input_dim..(i + 1) * self.input_dim].copy_from_slice(&z);
        }
        Ok(out)
    }
}

/// Per-layer decay strengths and first-layer category divisors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPolicy {
    pub lambda_per_layer: Vec<f64>,
    /// One divisor per input column.
    pub input_divisors: Vec<f64>,
}

impl DecayPolicy {
    pub fn none(arch: &MlpArchitecture) -> Self {
        DecayPolicy {
            lambda_per_layer: vec![0.0; arch.n_weight_layers()],
            input_divisors: vec![1.0; arch.input_dim],
        }
    }

    /// `lambdas` has one entry per weight layer, or a single entry shared by all.
    pub fn new(arch: &MlpArchitecture, lambdas: &[f64], input_divisors: Vec<f64>) -> Result<Self> {
        let lambda_per_layer = match lambdas.len() {
            0 => vec![0.0; arch.n_weight_layers()],
            1 => vec![lambdas[0]; arch.n_weight_layers()],
            k if k == arch.n_weight_layers() => lambdas.to_vec(),
            k => {
                return Err(Error::Config(format!(
                    "{k} decay values for {} weight layers",
                    arch.n_weight_layers()
                )))
            }
        };
        let policy = DecayPolicy {
            lambda_per_layer,
            input_divisors,
        };
        policy.validate(arch)?;
        Ok(policy)
    }

    pub fn validate(&self, arch: &MlpArchitecture) -> Result<()> {
        check_len(arch.n_weight_layers(), self.lambda_per_layer.len(), "decay layers")?;
        check_len(arch.input_dim, self.input_divisors.len(), "decay divisors")?;
        if self.lambda_per_layer.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("decay parameters must be finite and non-negative".into()));
        }
        if self.input_divisors.iter().any(|&d| !(d >= 1.0)) {
            return Err(Error::Config("decay divisors must be at least 1".into()));
        }
        Ok(())
    }

    /// Penalty coefficient of every weight (0 for biases).
    pub fn coefficients(&self, arch: &MlpArchitecture) -> Vec<f64> {
        let layout = arch.layout();
        let mut c = vec![0.0; layout.len()];
        for l in 0..layout.n_layers() {
            let fan_in = layout.fan_in(l);
            let start = layout.layer_range(l).start;
            for j in 0..layout.fan_out(l) {
                for i in 0..fan_in {
                    let div = if l == 0 { self.input_divisors[i] } else { 1.0 };
                    c[start + j * (fan_in + 1) + 1 + i] = self.lambda_per_layer[l] / div;
                }
            }
        }
        c
    }

    /// `Σ c_j w_j²`, adding its gradient into `grad`.
    pub fn penalty(&self, arch: &MlpArchitecture, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let c = self.coefficients(arch);
        let value = c.iter().zip(w).map(|(ci, wi)| ci * wi * wi).sum();
        if let Some(g) = grad {
            for ((gj, ci), wi) in g.iter_mut().zip(&c).zip(w) {
                *gj += 2.0 * ci * wi;
            }
        }
        value
    }
}

/// Regularized empirical error of a network over a dataset.
pub struct Objective<'a> {
    arch: &'a MlpArchitecture,
    data: &'a Dataset,
    decay: &'a DecayPolicy,
    block_weights: Vec<f64>,
}

/// Value, decomposition and gradient of the objective at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub mean_loss: f64,
    pub penalty: f64,
    pub gradient: Vec<f64>,
    pub exp_capped: usize,
}

impl<'a> Objective<'a> {
    pub fn new(arch: &'a MlpArchitecture, data: &'a Dataset, decay: &'a DecayPolicy, block_weights: &[f64]) -> Result<Self> {
        if data.n == 0 {
            return Err(Error::Config("empty dataset".into()));
        }
        check_len(arch.input_dim, data.input_dim, "dataset input width")?;
        check_len(arch.output_dim(), data.output_dim, "dataset target width")?;
        check_len(arch.output_blocks.len(), data.n_blocks, "dataset blocks")?;
        decay.validate(arch)?;
        let block_weights = if block_weights.is_empty() {
            vec![1.0; arch.output_blocks.len()]
        } else {
            check_len(arch.output_blocks.len(), block_weights.len(), "block weights")?;
            block_weights.to_vec()
        };
        Ok(Objective {
            arch,
            data,
            decay,
            block_weights,
        })
    }

    fn example_report(&self, i: usize, t: &[f64]) -> Result<BlockLossReport> {
        let y = self.data.y(i);
        let targets: Vec<BlockTarget<'_>> = self
            .arch
            .output_blocks
            .iter()
            .enumerate()
            .map(|(b, block)| BlockTarget {
                block,
                y: &y[block.columns.clone()],
                t: &t[block.columns.clone()],
                micro_count: self.data.micro(i, b),
            })
            .collect();
        composite_loss(&targets, &self.block_weights)
    }

    /// Mean composite loss without the decay penalty.
    pub fn mean_loss(&self, w: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.data.n {
            let out = crate::mlp::predict(self.arch, w, self.data.x(i))?;
            total += self.example_report(i, &out)?.total;
        }
        Ok(total / self.data.n as f64)
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<Evaluation> {
        let layout = self.arch.layout();
        let mut gradient = vec![0.0; layout.len()];
        let mut total = 0.0;
        let mut exp_capped = 0;
        let inv_n = 1.0 / self.data.n as f64;
        for i in 0..self.data.n {
            let trace = forward(self.arch, w, self.data.x(i))?;
            exp_capped += usize::from(trace.exp_capped);
            let report = self.example_report(i, trace.output())?;
            total += report.total;
            let g: Vec<f64> = report.gradient().into_iter().map(|v| v * inv_n).collect();
            backward_accumulate(self.arch, &layout, w, &trace, &g, &mut gradient)?;
        }
        let mean_loss = total * inv_n;
        let penalty = self.decay.penalty(self.arch, w, Some(&mut gradient));
        Ok(Evaluation {
            value: mean_loss + penalty,
            mean_loss,
            penalty,
            gradient,
            exp_capped,
        })
    }

    /// `(R(w), ∇R(w))`.
    pub fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(w)?;
        Ok((e.value, e.gradient))
    }
}

/// `R(w)` and its gradient; see the module docs.
pub fn regularized_empirical_error(
    arch: &MlpArchitecture,
    w: &[f64],
    data: &Dataset,
    decay: &DecayPolicy,
    block_weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    Objective::new(arch, data, decay, block_weights)?.value_and_gradient(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Activation;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn quadratic_examples() {
        assert_eq!(quadratic_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        let l = quadratic_loss(&[0.0], &[2.0]).unwrap();
        assert_eq!(l.value, 4.0);
        assert_eq!(l.gradient, vec![4.0]);
        assert!(quadratic_loss(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap().value, 0.0);
        assert!((cross_entropy_loss(&[1.0, 0.0], &[0.5, 0.5]).unwrap().value - LN2).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let v = cross_entropy_loss(&[1.0, 0.0, 0.0], &[third; 3]).unwrap().value;
        assert!((v - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_floors_zero_probability() {
        let v = cross_entropy_loss(&[1.0], &[0.0]).unwrap();
        assert!((v.value + PROB_FLOOR.ln()).abs() < 1e-12);
        assert_eq!(v.gradient, vec![0.0]);
    }

    #[test]
    fn independent_examples() {
        let v = independent_cross_entropy_loss(&[1.0, 1.0], &[0.5, 0.5]).unwrap().value;
        assert!((v - 2.0 * LN2).abs() < 1e-12);
        assert_eq!(independent_cross_entropy_loss(&[0.0, 0.0, 0.0], &[0.3, 0.9, 0.01]).unwrap().value, 0.0);
        let v = independent_cross_entropy_loss(&[1.0, 0.0], &[0.9, 0.9]).unwrap().value;
        assert!((v + 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_counts_absent_categories() {
        let v = bernoulli_cross_entropy_loss(&[1.0, 0.0], &[0.9, 0.9]).unwrap().value;
        assert!((v - (-(0.9f64.ln()) - 0.1f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn multinomial_examples() {
        let v = weighted_multinomial_loss(&[0.5, 0.5], &[0.5, 0.5], 4.0).unwrap().value;
        assert!((v - 4.0 * LN2).abs() < 1e-12);
        let ce = cross_entropy_loss(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        let w1 = weighted_multinomial_loss(&[0.3, 0.7], &[0.6, 0.4], 1.0).unwrap();
        assert_eq!(ce, w1);
        let v = weighted_multinomial_loss(&[1.0, 0.0], &[0.8, 0.2], 5.0).unwrap().value;
        assert!((v + 5.0 * 0.8f64.ln()).abs() < 1e-12);
        assert!(weighted_multinomial_loss(&[1.0], &[1.0], 0.0).is_err());
    }

    fn two_blocks() -> (OutputBlockSpec, OutputBlockSpec) {
        (
            OutputBlockSpec::new("q", 0..1, BlockKind::LinearQuadratic),
            OutputBlockSpec::new("c", 1..3, BlockKind::SoftmaxCrossEntropy),
        )
    }

    #[test]
    fn composite_additivity_and_scaling() {
        let (q, c) = two_blocks();
        let a = BlockTarget {
            block: &q,
            y: &[1.0],
            t: &[2.5],
            micro_count: 1.0,
        };
        let b = BlockTarget {
            block: &c,
            y: &[0.0, 1.0],
            t: &[0.3, 0.7],
            micro_count: 1.0,
        };
        let la = block_loss(&q, a.y, a.t, 1.0).unwrap().value;
        let lb = block_loss(&c, b.y, b.t, 1.0).unwrap().value;
        assert_eq!(composite_loss(&[a], &[]).unwrap().total, la);
        assert_eq!(composite_loss(&[a, b], &[1.0, 1.0]).unwrap().total, la + lb);
        let r = composite_loss(&[a, b], &[2.0, 0.0]).unwrap();
        assert_eq!(r.total, 2.0 * la);
        assert_eq!(r.gradient().len(), 3);
    }

    fn tiny_problem() -> (MlpArchitecture, Dataset) {
        let (q, c) = two_blocks();
        let arch = MlpArchitecture::single_hidden(6, 2, Activation::Tanh, vec![q, c]).unwrap();
        let data = Dataset::from_rows(
            &[vec![0.1, -0.2, 0.3, 0.0, 1.0, -1.0], vec![0.5, 0.5, -0.5, 1.0, 0.0, 0.2]],
            &[vec![0.3, 1.0, 0.0], vec![-0.1, 0.0, 1.0]],
            2,
        )
        .unwrap();
        (arch, data)
    }

    #[test]
    fn zero_decay_is_mean_loss() {
        let (arch, data) = tiny_problem();
        let decay = DecayPolicy::none(&arch);
        let w: Vec<f64> = (0..crate::mlp::count_weights(&arch)).map(|i| (i as f64).cos() * 0.3).collect();
        let obj = Objective::new(&arch, &data, &decay, &[]).unwrap();
        let e = obj.evaluate(&w).unwrap();
        assert_eq!(e.penalty, 0.0);
        assert_eq!(e.value, obj.mean_loss(&w).unwrap());
    }

    #[test]
    fn zero_weights_zero_penalty() {
        let (arch, _) = tiny_problem();
        let decay = DecayPolicy::new(&arch, &[0.7], vec![5.0, 5.0, 5.0, 5.0, 5.0, 1.0]).unwrap();
        let w = vec![0.0; crate::mlp::count_weights(&arch)];
        assert_eq!(decay.penalty(&arch, &w, None), 0.0);
    }

    #[test]
    fn five_category_group_penalty() {
        // First-layer weights from a 5-category group are penalized by λ/5.
        let (arch, _) = tiny_problem();
        let lambda = 0.3;
        let decay = DecayPolicy::new(&arch, &[lambda, 0.0], vec![5.0, 5.0, 5.0, 5.0, 5.0, 1.0]).unwrap();
        let layout = arch.layout();
        let mut w = vec![0.0; layout.len()];
        let mut expected = 0.0;
        for k in 0..2 {
            for i in 0..5 {
                let v = 0.1 * (k * 5 + i + 1) as f64;
                w[layout.index(0, k, crate::mlp::WeightInput::From(i))] = v;
                expected += v * v;
            }
        }
        let p = decay.penalty(&arch, &w, None);
        assert!((p - lambda / 5.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn biases_are_not_penalized() {
        let (arch, _) = tiny_problem();
        let decay = DecayPolicy::new(&arch, &[1.0], vec![1.0; 6]).unwrap();
        let layout = arch.layout();
        let coeffs = decay.coefficients(&arch);
        for (j, c) in coeffs.iter().enumerate() {
            assert_eq!(*c == 0.0, layout.is_bias(j), "position {j}");
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let (arch, data) = tiny_problem();
        let decay = DecayPolicy::none(&arch);
        let empty = data.select(&[]);
        assert!(Objective::new(&arch, &empty, &decay, &[]).is_err());
    }
}
