//! Data splitting, hidden-size sweeps and k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{count_weights, Activation, MlpArchitecture};
use crate::objective::{Dataset, DecayPolicy, Objective};
use crate::recoding::{ColumnStats, OutputBlockSpec};
use crate::symbolic::SymbolicTable;
use crate::training::{derive_seed, train, FitReport, TrainConfig};

pub const DEFAULT_HIDDEN_SIZES: [usize; 8] = [3, 5, 7, 10, 15, 20, 30, 40];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Counts { train: usize, validation: usize, test: usize },
    Ratios { train: f64, validation: f64, test: f64 },
}

impl Default for Split {
    fn default() -> Self {
        Split::Counts {
            train: 140,
            validation: 60,
            test: 60,
        }
    }
}

impl Split {
    /// Part sizes for `n` rows. Ratios are floored, then the remaining rows
    /// go one each to the parts with the largest fractional remainders.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        match *self {
            Split::Counts { train, validation, test } => {
                if train + validation + test != n {
                    return Err(Error::Config(format!(
                        "split ({train}, {validation}, {test}) does not sum to {n} rows"
                    )));
                }
                Ok([train, validation, test])
            }
            Split::Ratios { train, validation, test } => {
                let r = [train, validation, test];
                let total: f64 = r.iter().sum();
                if r.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || !(total > 0.0) {
                    return Err(Error::Config("split ratios must be non-negative with a positive sum".into()));
                }
                let exact: Vec<f64> = r.iter().map(|x| x / total * n as f64).collect();
                let mut counts = [0usize; 3];
                for (c, e) in counts.iter_mut().zip(&exact) {
                    *c = e.floor() as usize;
                }
                let mut order: Vec<usize> = (0..3).collect();
                order.sort_by(|&a, &b| {
                    let fa = exact[a] - exact[a].floor();
                    let fb = exact[b] - exact[b].floor();
                    fb.total_cmp(&fa).then(a.cmp(&b))
                });
                let mut left = n - counts.iter().sum::<usize>();
                for &i in order.iter().cycle() {
                    if left == 0 {
                        break;
                    }
                    counts[i] += 1;
                    left -= 1;
                }
                Ok(counts)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionPlan {
    pub hidden_sizes: Vec<usize>,
    pub split: Split,
    pub cv_folds: Option<usize>,
}

impl Default for SelectionPlan {
    fn default() -> Self {
        SelectionPlan {
            hidden_sizes: DEFAULT_HIDDEN_SIZES.to_vec(),
            split: Split::default(),
            cv_folds: None,
        }
    }
}

impl SelectionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden sizes must be a non-empty list of positive integers".into()));
        }
        if matches!(self.cv_folds, Some(k) if k < 2) {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded uniform shuffle of `0..n` cut into the split's parts.
pub fn split_indices(n: usize, split: &Split, seed: u64) -> Result<SplitIndices> {
    let [a, b, _] = split.counts(n)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(a + b);
    let validation = idx.split_off(a);
    Ok(SplitIndices {
        train: idx,
        validation,
        test,
    })
}

pub fn split_dataset(t: &SymbolicTable, plan: &SelectionPlan, seed: u64) -> Result<(SymbolicTable, SymbolicTable, SymbolicTable)> {
    let s = split_indices(t.n_rows(), &plan.split, seed)?;
    Ok((t.select_rows(&s.train), t.select_rows(&s.validation), t.select_rows(&s.test)))
}

/// A single-hidden-layer architecture with the hidden size left open.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchTemplate {
    pub input_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    pub output_blocks: Vec<OutputBlockSpec>,
}

impl ArchTemplate {
    pub fn with_hidden(&self, q: usize) -> Result<MlpArchitecture> {
        MlpArchitecture::single_hidden(self.input_dim, q, self.activation, self.output_blocks.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hidden_size: usize,
    pub weights: usize,
    pub validation_error: Option<f64>,
    pub error: Option<String>,
    pub winner: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub candidates: Vec<Candidate>,
    pub hidden_size: usize,
    pub architecture: MlpArchitecture,
    pub fit: FitReport,
    /// Mean loss of the winner on the test set, when one was given.
    pub test_error: Option<f64>,
}

/// Lowest validation error wins; ties go to the smaller hidden size.
pub fn select_winner(errors: &[(usize, f64)]) -> Option<usize> {
    errors
        .iter()
        .filter(|(_, e)| !e.is_nan())
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|&(q, _)| q)
}

/// Held-out mean loss without decay.
pub fn mean_loss(arch: &MlpArchitecture, w: &[f64], data: &Dataset, block_weights: &[f64]) -> Result<f64> {
    let decay = DecayPolicy::none(arch);
    Objective::new(arch, data, &decay, block_weights)?.mean_loss(w)
}

/// Trains one model per hidden size and keeps the one with the lowest
/// validation error. Each size draws its restart seeds from
/// `(config.seed, size)`, so results do not depend on evaluation order.
pub fn sweep(
    template: &ArchTemplate,
    hidden_sizes: &[usize],
    train_set: &Dataset,
    validation_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<SelectionReport> {
    if hidden_sizes.is_empty() {
        return Err(Error::Config("no hidden sizes to sweep".into()));
    }
    let fits: Vec<(usize, Result<(MlpArchitecture, FitReport)>)> = hidden_sizes
        .par_iter()
        .map(|&q| {
            let run = || -> Result<(MlpArchitecture, FitReport)> {
                let arch = template.with_hidden(q)?;
                let cfg = TrainConfig {
                    seed: derive_seed(config.seed, q as u64),
                    ..config.clone()
                };
                let fit = train(&arch, train_set, validation_set, &cfg)?;
                Ok((arch, fit))
            };
            (q, run())
        })
        .collect();

    let errors: Vec<(usize, f64)> = fits
        .iter()
        .filter_map(|(q, r)| r.as_ref().ok().map(|(_, f)| (*q, f.best_validation_error)))
        .collect();
    let winner = select_winner(&errors).ok_or_else(|| Error::Optimization("every candidate size failed".into()))?;

    let mut candidates = Vec::with_capacity(fits.len());
    let mut chosen = None;
    for (q, r) in fits {
        let weights = template.with_hidden(q).map(|a| count_weights(&a)).unwrap_or(0);
        match r {
            Ok((arch, fit)) => {
                candidates.push(Candidate {
                    hidden_size: q,
                    weights,
                    validation_error: Some(fit.best_validation_error),
                    error: None,
                    winner: q == winner && chosen.is_none(),
                });
                if q == winner && chosen.is_none() {
                    chosen = Some((arch, fit));
                }
            }
            Err(e) => {
                log::warn!("hidden size {q} failed: {e}");
                candidates.push(Candidate {
                    hidden_size: q,
                    weights,
                    validation_error: None,
                    error: Some(e.to_string()),
                    winner: false,
                });
            }
        }
    }
    let (architecture, fit) = chosen.expect("winner comes from a successful fit");
    let test_error = test_set
        .map(|t| mean_loss(&architecture, &fit.weights, t, &config.block_weights))
        .transpose()?;
    Ok(SelectionReport {
        candidates,
        hidden_size: winner,
        architecture,
        fit,
        test_error,
    })
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn fold_assignments(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config("k-fold cross-validation needs k >= 2".into()));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds for {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_errors: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// k-fold estimate of held-out mean loss. Inputs are re-standardized on each
/// fold's training rows; with no separate validation set, early stopping
/// monitors the training rows.
pub fn k_fold_cv(arch: &MlpArchitecture, data: &Dataset, k: usize, config: &TrainConfig) -> Result<CvReport> {
    let folds = fold_assignments(data.n, k, config.seed)?;
    let fold_errors: Vec<Result<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            let train_raw = data.select(&train_idx);
            let held_raw = data.select(&folds[f]);
            let stats = if train_raw.n >= 2 {
                ColumnStats::fit((0..train_raw.n).map(|i| train_raw.x(i)), data.input_dim)?
            } else {
                ColumnStats::identity(data.input_dim)
            };
            let train_set = train_raw.standardize_inputs(&stats)?;
            let held = held_raw.standardize_inputs(&stats)?;
            let cfg = TrainConfig {
                seed: derive_seed(config.seed, f as u64),
                ..config.clone()
            };
            let fit = train(arch, &train_set, &train_set, &cfg)?;
            mean_loss(arch, &fit.weights, &held, &config.block_weights)
        })
        .collect();
    let fold_errors = fold_errors.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean = fold_errors.iter().sum::<f64>() / k as f64;
    let sd = (fold_errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1) as f64).sqrt();
    Ok(CvReport { fold_errors, mean, sd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_sizes() {
        let s = split_indices(260, &Split::default(), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (140, 60, 60));
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..260).collect::<Vec<_>>());
    }

    #[test]
    fn ratio_rounding() {
        let r = Split::Ratios {
            train: 0.5,
            validation: 0.25,
            test: 0.25,
        };
        assert_eq!(r.counts(4).unwrap(), [2, 1, 1]);
        let thirds = Split::Ratios {
            train: 1.0,
            validation: 1.0,
            test: 1.0,
        };
        assert_eq!(thirds.counts(10).unwrap(), [4, 3, 3]);
    }

    #[test]
    fn infeasible_counts() {
        let s = Split::Counts {
            train: 5,
            validation: 5,
            test: 5,
        };
        assert!(split_indices(10, &s, 0).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let a = split_indices(50, &Split::Ratios { train: 0.6, validation: 0.2, test: 0.2 }, 9).unwrap();
        let b = split_indices(50, &Split::Ratios { train: 0.6, validation: 0.2, test: 0.2 }, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn winner_tie_break() {
        assert_eq!(select_winner(&[(10, 0.5), (3, 0.5), (5, 0.7)]), Some(3));
        assert_eq!(select_winner(&[(7, 0.2)]), Some(7));
        assert_eq!(select_winner(&[]), None);
    }

    #[test]
    fn leave_one_out_folds() {
        let f = fold_assignments(4, 4, 1).unwrap();
        assert!(f.iter().all(|v| v.len() == 1));
        assert!(fold_assignments(3, 4, 1).is_err());
        assert!(fold_assignments(3, 1, 1).is_err());
    }
}
