//! End-to-end training on symbolic tables: recode, standardize, sweep hidden
//! sizes, and decode predictions back to symbolic values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mlp::{predict, Activation, SavedNetwork};
use crate::objective::Dataset;
use crate::recoding::{
    coding_for, decode_output_block, encode_variables, fit_target_standardizer, output_blocks, BlockKind, CodingModes,
    ColumnStats, EncodedMatrix, OutputBlockSpec,
};
use crate::selection::{k_fold_cv, mean_loss, select_winner, split_indices, sweep, ArchTemplate, CvReport, SelectionReport, Split, SplitIndices};
use crate::symbolic::{Role, SymbolicTable, SymbolicValue, VariableSpec};
use crate::training::{derive_seed, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Per-variable coding overrides.
    pub coding: CodingModes,
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub split: Split,
    /// When set, `select` scores hidden sizes by k-fold cross-validation.
    pub cv_folds: Option<usize>,
    /// Add absent-category terms to multi-valued target losses.
    pub bernoulli_multi: bool,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            coding: CodingModes::new(),
            hidden_sizes: vec![5],
            hidden_activation: Activation::Tanh,
            split: Split::Ratios {
                train: 0.6,
                validation: 0.2,
                test: 0.2,
            },
            cv_folds: None,
            bernoulli_multi: false,
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: PipelineConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden_sizes must list positive sizes".into()));
        }
        if matches!(self.cv_folds, Some(k) if k < 2) {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        self.train.validate()
    }
}

/// Quality of one target's decoded predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetric {
    pub variable: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    /// Mean composite loss in the standardized target space.
    pub mean_loss: f64,
    pub targets: Vec<TargetMetric>,
}

/// A trained network with everything needed to recode new tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub inputs: Vec<VariableSpec>,
    pub targets: Vec<VariableSpec>,
    /// Resolved coding of every input and target.
    pub coding: CodingModes,
    pub input_stats: ColumnStats,
    pub input_divisors: Vec<f64>,
    pub target_stats: ColumnStats,
    pub network: SavedNetwork,
    pub block_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub split: SplitIndices,
    pub selection: SelectionReport,
    pub test_metrics: Option<Metrics>,
}

fn resolve_codings(table: &SymbolicTable, overrides: &CodingModes) -> Result<CodingModes> {
    for name in overrides.keys() {
        if table.variable_index(name).is_none() {
            return Err(Error::Schema(format!("coding given for unknown variable `{name}`")));
        }
    }
    (0..table.specs().len())
        .map(|j| Ok((table.specs()[j].name.clone(), coding_for(table, j, overrides)?)))
        .collect()
}

fn micro_counts(table: &SymbolicTable, target_idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(table.n_rows() * target_idx.len());
    for row in table.rows() {
        for &j in target_idx {
            out.push(match &row[j] {
                SymbolicValue::Distribution {
                    micro_count: Some(l), ..
                } => f64::from(*l),
                _ => 1.0,
            });
        }
    }
    out
}

fn standardized_rows(m: &EncodedMatrix, stats: &ColumnStats) -> Vec<Vec<f64>> {
    m.rows().map(|r| stats.transform_row(r)).collect()
}

struct Encoded {
    inputs: EncodedMatrix,
    targets: EncodedMatrix,
    blocks: Vec<OutputBlockSpec>,
    micro: Vec<f64>,
}

fn encode(table: &SymbolicTable, coding: &CodingModes, bernoulli: bool) -> Result<Encoded> {
    let input_idx = table.indices_with_role(Role::Input);
    let target_idx = table.indices_with_role(Role::Target);
    if input_idx.is_empty() || target_idx.is_empty() {
        return Err(Error::Schema("the table needs at least one input and one target variable".into()));
    }
    let inputs = encode_variables(table, &input_idx, coding)?;
    let targets = encode_variables(table, &target_idx, coding)?;
    let mut blocks = output_blocks(&targets, table)?;
    for b in &mut blocks {
        b.bernoulli = bernoulli && b.kind == BlockKind::LogisticIndependent;
    }
    Ok(Encoded {
        inputs,
        targets,
        blocks,
        micro: micro_counts(table, &target_idx),
    })
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, n_blocks: usize, micro: Vec<f64>, divisors: &[f64]) -> Result<Dataset> {
    Dataset::from_rows(&x, &y, n_blocks)?
        .with_micro_counts(micro)?
        .with_input_divisors(divisors.to_vec())
}

/// Splits the table, trains one network per hidden size and keeps the one
/// with the lowest validation loss.
pub fn fit_table(table: &SymbolicTable, config: &PipelineConfig) -> Result<FitOutcome> {
    config.validate()?;
    let coding = resolve_codings(table, &config.coding)?;
    let enc = encode(table, &coding, config.bernoulli_multi)?;
    let split = split_indices(table.n_rows(), &config.split, derive_seed(config.train.seed, 1))?;
    if split.train.len() < 2 || split.validation.is_empty() {
        return Err(Error::Config("the split needs at least 2 training rows and 1 validation row".into()));
    }
    let train_in = enc.inputs.select_rows(&split.train);
    let input_stats = ColumnStats::fit(train_in.rows(), train_in.n_cols)?;
    let target_stats = fit_target_standardizer(&enc.targets.select_rows(&split.train), &enc.blocks)?.stats();
    let divisors = enc.inputs.decay_divisors();
    let n_blocks = enc.blocks.len();
    let part = |idx: &[usize]| -> Result<Dataset> {
        let x = standardized_rows(&enc.inputs.select_rows(idx), &input_stats);
        let y = standardized_rows(&enc.targets.select_rows(idx), &target_stats);
        let micro = idx
            .iter()
            .flat_map(|&i| enc.micro[i * n_blocks..(i + 1) * n_blocks].iter().copied())
            .collect();
        dataset(x, y, n_blocks, micro, &divisors)
    };
    let (train, valid) = (part(&split.train)?, part(&split.validation)?);
    let test = (!split.test.is_empty()).then(|| part(&split.test)).transpose()?;

    let template = ArchTemplate {
        input_dim: enc.inputs.n_cols,
        activation: config.hidden_activation,
        output_blocks: enc.blocks.clone(),
    };
    let selection = sweep(&template, &config.hidden_sizes, &train, &valid, test.as_ref(), &config.train)?;
    let specs_with = |role| {
        table
            .specs()
            .iter()
            .filter(|s| s.role == role)
            .cloned()
            .collect::<Vec<_>>()
    };
    let model = TrainedModel {
        inputs: specs_with(Role::Input),
        targets: specs_with(Role::Target),
        coding,
        input_stats,
        input_divisors: divisors,
        target_stats,
        network: SavedNetwork::new(selection.architecture.clone(), selection.fit.weights.clone())?,
        block_weights: config.train.block_weights.clone(),
    };
    let test_metrics = (!split.test.is_empty())
        .then(|| model.evaluate(&table.select_rows(&split.test)))
        .transpose()?;
    Ok(FitOutcome {
        model,
        split,
        selection,
        test_metrics,
    })
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        m.network.architecture.validate()?;
        check_len(m.network.architecture.input_dim, m.input_stats.n_cols(), "model input statistics")?;
        check_len(m.network.architecture.output_dim(), m.target_stats.n_cols(), "model target statistics")?;
        Ok(m)
    }

    fn check_schema(&self, table: &SymbolicTable, with_targets: bool) -> Result<()> {
        let specs = self.inputs.iter().chain(if with_targets { &self.targets[..] } else { &[] });
        for spec in specs {
            let j = table
                .variable_index(&spec.name)
                .ok_or_else(|| Error::Schema(format!("missing variable `{}`", spec.name)))?;
            let other = &table.specs()[j];
            if other.kind != spec.kind || other.categories != spec.categories || other.ordered != spec.ordered {
                return Err(Error::Schema(format!("variable `{}` differs from the training schema", spec.name)));
            }
        }
        Ok(())
    }

    fn indices(&self, table: &SymbolicTable, specs: &[VariableSpec]) -> Vec<usize> {
        specs
            .iter()
            .map(|s| table.variable_index(&s.name).expect("schema checked"))
            .collect()
    }

    fn blocks(&self) -> &[OutputBlockSpec] {
        &self.network.architecture.output_blocks
    }

    /// Network outputs for every row, in the unstandardized encoded target space.
    pub fn predict_encoded(&self, table: &SymbolicTable) -> Result<Vec<Vec<f64>>> {
        self.check_schema(table, false)?;
        let inputs = encode_variables(table, &self.indices(table, &self.inputs), &self.coding)?;
        let arch = &self.network.architecture;
        standardized_rows(&inputs, &self.input_stats)
            .par_iter()
            .map(|x| Ok(self.target_stats.inverse_row(&predict(arch, &self.network.weights, x)?)))
            .collect()
    }

    /// Decoded predictions: one symbolic value per target per row.
    pub fn predict(&self, table: &SymbolicTable) -> Result<Vec<Vec<SymbolicValue>>> {
        self.predict_encoded(table)?
            .iter()
            .map(|t| {
                self.blocks()
                    .iter()
                    .map(|b| decode_output_block(b, &t[b.columns.clone()]))
                    .collect()
            })
            .collect()
    }

    /// Loss and per-target metrics on a table that carries the targets.
    pub fn evaluate(&self, table: &SymbolicTable) -> Result<Metrics> {
        self.check_schema(table, true)?;
        if table.n_rows() == 0 {
            return Err(Error::Config("cannot evaluate on an empty table".into()));
        }
        let input_idx = self.indices(table, &self.inputs);
        let target_idx = self.indices(table, &self.targets);
        let inputs = encode_variables(table, &input_idx, &self.coding)?;
        let targets = encode_variables(table, &target_idx, &self.coding)?;
        check_len(self.target_stats.n_cols(), targets.n_cols, "target columns")?;
        let data = dataset(
            standardized_rows(&inputs, &self.input_stats),
            standardized_rows(&targets, &self.target_stats),
            self.blocks().len(),
            micro_counts(table, &target_idx),
            &self.input_divisors,
        )?;
        let loss = mean_loss(&self.network.architecture, &self.network.weights, &data, &self.block_weights)?;
        let predicted = self.predict(table)?;
        let targets = self
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, block)| {
                let j = target_idx[b];
                let pairs = table.rows().iter().zip(&predicted).map(|(row, p)| (&row[j], &p[b]));
                target_metric(block, pairs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Metrics {
            n: table.n_rows(),
            mean_loss: loss,
            targets,
        })
    }
}

fn target_metric<'a>(
    block: &OutputBlockSpec,
    pairs: impl Iterator<Item = (&'a SymbolicValue, &'a SymbolicValue)>,
) -> Result<TargetMetric> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (truth, pred) in pairs {
        total += match (truth, pred) {
            (SymbolicValue::Number(a), SymbolicValue::Number(b)) => (a - b).abs(),
            (SymbolicValue::Category(a), SymbolicValue::Number(b)) => (*a as f64 - b).abs(),
            (SymbolicValue::Category(a), SymbolicValue::Category(b)) => f64::from(u8::from(a == b)),
            (SymbolicValue::Interval { lower: a, upper: b }, SymbolicValue::Interval { lower: c, upper: d }) => {
                ((a - c).abs() + (b - d).abs()) / 2.0
            }
            (SymbolicValue::CategorySet(a), SymbolicValue::CategorySet(b)) => {
                let union = a.union(b).count();
                if union == 0 {
                    1.0
                } else {
                    a.intersection(b).count() as f64 / union as f64
                }
            }
            (SymbolicValue::Distribution { probs: p, .. }, SymbolicValue::Distribution { probs: q, .. }) => {
                p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
            }
            // Taxonomy-coded single categories decode to a leaf set.
            (SymbolicValue::Category(a), SymbolicValue::CategorySet(b)) => {
                let hit = b.contains(a);
                if hit {
                    1.0 / b.len() as f64
                } else {
                    0.0
                }
            }
            _ => {
                return Err(Error::Schema(format!(
                    "prediction for `{}` does not match its target type",
                    block.source_variable
                )))
            }
        };
        n += 1;
    }
    let metric = match block.kind {
        BlockKind::LinearQuadratic => "mae",
        BlockKind::IntervalMeanLength | BlockKind::IntervalMeanLogLength => "bound_mae",
        BlockKind::SoftmaxCrossEntropy => "accuracy",
        BlockKind::LogisticIndependent => "jaccard",
        BlockKind::ModalSoftmax => "total_variation",
    };
    Ok(TargetMetric {
        variable: block.source_variable.clone(),
        metric: metric.into(),
        value: total / n.max(1) as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    pub hidden_size: usize,
    pub report: CvReport,
    pub winner: bool,
}

/// k-fold scores per hidden size over the whole table. Targets are
/// standardized on all rows; inputs are re-standardized inside each fold.
pub fn cross_validate_table(table: &SymbolicTable, config: &PipelineConfig, k: usize) -> Result<Vec<CvCandidate>> {
    config.validate()?;
    let coding = resolve_codings(table, &config.coding)?;
    let enc = encode(table, &coding, config.bernoulli_multi)?;
    let target_stats = fit_target_standardizer(&enc.targets, &enc.blocks)?.stats();
    let data = dataset(
        enc.inputs.rows().map(<[f64]>::to_vec).collect(),
        standardized_rows(&enc.targets, &target_stats),
        enc.blocks.len(),
        enc.micro.clone(),
        &enc.inputs.decay_divisors(),
    )?;
    let template = ArchTemplate {
        input_dim: enc.inputs.n_cols,
        activation: config.hidden_activation,
        output_blocks: enc.blocks,
    };
    let reports = config
        .hidden_sizes
        .iter()
        .map(|&q| {
            let cfg = TrainConfig {
                seed: derive_seed(config.train.seed, q as u64),
                ..config.train.clone()
            };
            Ok((q, k_fold_cv(&template.with_hidden(q)?, &data, k, &cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let winner = select_winner(&reports.iter().map(|(q, r)| (*q, r.mean)).collect::<Vec<_>>());
    Ok(reports
        .into_iter()
        .map(|(q, report)| CvCandidate {
            hidden_size: q,
            report,
            winner: Some(q) == winner,
        })
        .collect())
}
