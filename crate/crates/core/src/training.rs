//! Multi-restart training with validation-based early stopping.

use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{init_weights, MlpArchitecture};
use crate::objective::{Dataset, DecayPolicy, Objective};
use crate::optim::{minimize, Method, MinimizeOptions, StopReason};

/// Derives an independent stream seed from a master seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    /// One value per weight layer, or a single value for all layers.
    pub lambda: Vec<f64>,
    /// Divide first-layer decay by the category count of each input group.
    pub normalize_categories: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            lambda: Vec::new(),
            normalize_categories: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopping {
    pub enabled: bool,
    /// Iterations without a validation improvement before a restart stops.
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            enabled: true,
            patience: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Method,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub decay: DecayConfig,
    pub early_stopping: EarlyStopping,
    /// Per output block; empty means all ones.
    pub block_weights: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Method::ConjugateGradient,
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
            restarts: 10,
            seed: 0,
            decay: DecayConfig::default(),
            early_stopping: EarlyStopping::default(),
            block_weights: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: TrainConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("gradient_tolerance must be positive".into()));
        }
        if self.early_stopping.enabled && self.early_stopping.patience == 0 {
            return Err(Error::Config("early-stopping patience must be at least 1".into()));
        }
        Ok(())
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            method: self.optimizer,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
        }
    }

    pub fn decay_policy(&self, arch: &MlpArchitecture, train: &Dataset) -> Result<DecayPolicy> {
        let divisors = if self.decay.normalize_categories {
            train.input_divisors.clone()
        } else {
            vec![1.0; arch.input_dim]
        };
        DecayPolicy::new(arch, &self.decay.lambda, divisors)
    }
}

/// Keeps the weights with the lowest validation error seen so far.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: Option<usize>,
    best: f64,
    best_iteration: usize,
    best_weights: Vec<f64>,
    since_best: usize,
}

impl EarlyStopper {
    /// `patience = None` records snapshots but never asks to stop.
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_iteration: 0,
            best_weights: Vec::new(),
            since_best: 0,
        }
    }

    pub fn observe(&mut self, iteration: usize, w: &[f64], validation_error: f64) -> ControlFlow<()> {
        if validation_error < self.best || self.best_weights.is_empty() {
            self.best = validation_error;
            self.best_iteration = iteration;
            self.best_weights = w.to_vec();
            self.since_best = 0;
            return ControlFlow::Continue(());
        }
        self.since_best += 1;
        match self.patience {
            Some(p) if self.since_best >= p => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    }

    pub fn best(&self) -> (usize, f64, &[f64]) {
        (self.best_iteration, self.best, &self.best_weights)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
    pub best_iteration: usize,
    pub best_validation_error: f64,
    pub final_training_error: f64,
    pub final_validation_error: f64,
    /// Set when the restart was aborted.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub weights: Vec<f64>,
    pub best_restart: usize,
    pub best_iteration: usize,
    pub best_validation_error: f64,
    pub stop_reason: StopReason,
    /// Regularized training error per iteration of the winning restart.
    pub training_curve: Vec<f64>,
    /// Validation error per iteration of the winning restart.
    pub validation_curve: Vec<f64>,
    pub restarts: Vec<RestartSummary>,
    #[serde(skip)]
    pub wall_time: Duration,
}

struct RestartRun {
    summary: RestartSummary,
    weights: Vec<f64>,
    training_curve: Vec<f64>,
    validation_curve: Vec<f64>,
}

fn run_restart(
    arch: &MlpArchitecture,
    objective: &Objective<'_>,
    valid: &Objective<'_>,
    config: &TrainConfig,
    seed: u64,
) -> Result<RestartRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = init_weights(arch, &mut rng);
    let patience = config.early_stopping.enabled.then_some(config.early_stopping.patience);
    let mut stopper = EarlyStopper::new(patience);
    let mut validation_curve = Vec::new();
    let mut callback_error = None;
    let result = minimize(
        |w| objective.value_and_gradient(w),
        &w0,
        &config.minimize_options(),
        |iter, w, _| match valid.mean_loss(w) {
            Ok(v) => {
                validation_curve.push(v);
                stopper.observe(iter, w, v)
            }
            Err(e) => {
                callback_error = Some(e);
                ControlFlow::Break(())
            }
        },
    )?;
    if let Some(e) = callback_error {
        return Err(e);
    }
    let final_validation_error = *validation_curve.last().expect("validation recorded at w0");
    let (best_iteration, best_validation_error, weights) = if config.early_stopping.enabled {
        let (i, v, w) = stopper.best();
        (i, v, w.to_vec())
    } else {
        (result.iterations, final_validation_error, result.w.clone())
    };
    Ok(RestartRun {
        summary: RestartSummary {
            seed,
            iterations: result.iterations,
            stop_reason: Some(result.stop),
            best_iteration,
            best_validation_error,
            final_training_error: result.value,
            final_validation_error,
            error: None,
        },
        weights,
        training_curve: result.values,
        validation_curve,
    })
}

/// Trains `config.restarts` networks from random starting points and keeps
/// the one with the lowest validation error (ties go to the earlier restart).
pub fn train(arch: &MlpArchitecture, train_set: &Dataset, validation_set: &Dataset, config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    arch.validate()?;
    if train_set.n == 0 || validation_set.n == 0 {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let start = Instant::now();
    let decay = config.decay_policy(arch, train_set)?;
    let objective = Objective::new(arch, train_set, &decay, &config.block_weights)?;
    let no_decay = DecayPolicy::none(arch);
    let valid = Objective::new(arch, validation_set, &no_decay, &config.block_weights)?;

    let runs: Vec<(u64, Result<RestartRun>)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            (seed, run_restart(arch, &objective, &valid, config, seed))
        })
        .collect();

    let mut summaries = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, RestartRun)> = None;
    for (r, (seed, run)) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                summaries.push(run.summary.clone());
                let better = match &best {
                    None => true,
                    Some((_, b)) => run.summary.best_validation_error < b.summary.best_validation_error,
                };
                if better {
                    best = Some((r, run));
                }
            }
            Err(e) => {
                log::warn!("restart {r} aborted: {e}");
                summaries.push(RestartSummary {
                    seed,
                    iterations: 0,
                    stop_reason: None,
                    best_iteration: 0,
                    best_validation_error: f64::NAN,
                    final_training_error: f64::NAN,
                    final_validation_error: f64::NAN,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let (best_restart, run) =
        best.ok_or_else(|| Error::Optimization(format!("all {} restarts failed", config.restarts)))?;
    Ok(FitReport {
        weights: run.weights,
        best_restart,
        best_iteration: run.summary.best_iteration,
        best_validation_error: run.summary.best_validation_error,
        stop_reason: run.summary.stop_reason.expect("successful restart"),
        training_curve: run.training_curve,
        validation_curve: run.validation_curve,
        restarts: summaries,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Activation;
    use crate::recoding::{BlockKind, OutputBlockSpec};

    fn regression_data(n: usize, offset: f64) -> Dataset {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 * 4.0 - 2.0 + offset]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(1.5 * x[0]).sin()]).collect();
        Dataset::from_rows(&xs, &ys, 1).unwrap()
    }

    fn arch(q: usize) -> MlpArchitecture {
        MlpArchitecture::single_hidden(
            1,
            q,
            Activation::Tanh,
            vec![OutputBlockSpec::new("y", 0..1, BlockKind::LinearQuadratic)],
        )
        .unwrap()
    }

    fn config() -> TrainConfig {
        TrainConfig {
            restarts: 3,
            max_iterations: 200,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_json_defaults() {
        let c = TrainConfig::from_json("{\"restarts\": 4}").unwrap();
        assert_eq!(c.restarts, 4);
        assert_eq!(c.early_stopping.patience, 50);
        assert!(TrainConfig::from_json("{\"restarts\": 0}").is_err());
        assert!(TrainConfig::from_json("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn derive_seed_separates_streams() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    #[test]
    fn early_stopper_keeps_minimum() {
        let mut s = EarlyStopper::new(Some(2));
        assert!(s.observe(0, &[0.0], 3.0).is_continue());
        assert!(s.observe(1, &[1.0], 1.0).is_continue());
        assert!(s.observe(2, &[2.0], 2.0).is_continue());
        assert!(s.observe(3, &[3.0], 1.0).is_break());
        assert_eq!(s.best(), (1, 1.0, &[1.0][..]));
    }

    #[test]
    fn training_is_deterministic() {
        let data = regression_data(30, 0.0);
        let a = train(&arch(4), &data, &data, &config()).unwrap();
        let b = train(&arch(4), &data, &data, &config()).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn returned_weights_match_best_snapshot() {
        let train_set = regression_data(12, 0.0);
        let valid = regression_data(12, 0.13);
        let a = arch(8);
        let r = train(&a, &train_set, &valid, &config()).unwrap();
        let min = r.validation_curve.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_validation_error, min);
        assert_eq!(r.validation_curve[r.best_iteration], min);
        let no_decay = DecayPolicy::none(&a);
        let obj = Objective::new(&a, &valid, &no_decay, &[]).unwrap();
        assert_eq!(obj.mean_loss(&r.weights).unwrap(), min);
    }

    #[test]
    fn empty_sets_rejected() {
        let data = regression_data(10, 0.0);
        let empty = data.select(&[]);
        assert!(train(&arch(2), &empty, &data, &config()).is_err());
        assert!(train(&arch(2), &data, &empty, &config()).is_err());
    }
}
