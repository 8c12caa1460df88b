use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symbolic_mlp::experiments::{apply_coding, generate_synthetic_stations, CodingMethod};
use symbolic_mlp::mlp::{Activation, MlpArchitecture};
use symbolic_mlp::objective::Dataset;
use symbolic_mlp::recoding::{BlockKind, ColumnStats, OutputBlockSpec};
use symbolic_mlp::selection::{fold_assignments, k_fold_cv, mean_loss, select_winner, sweep, ArchTemplate};
use symbolic_mlp::training::{train, DecayConfig, EarlyStopping, TrainConfig};

fn linear_out() -> Vec<OutputBlockSpec> {
    vec![OutputBlockSpec::new("y", 0..1, BlockKind::LinearQuadratic)]
}

fn regression(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|r| vec![r[0] - 0.5 * r[1] + 0.1 * rng.random_range(-1.0..1.0)])
        .collect();
    Dataset::from_rows(&x, &y, 1).unwrap()
}

proptest! {
    #[test]
    fn folds_partition_rows(n in 2usize..200, k in 2usize..20, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_assignments(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn winner_ignores_candidate_order(
        errors in prop::collection::vec((1usize..50, prop::sample::select(vec![0.1, 0.2, 0.3, 0.4])), 1..10),
        seed in any::<u64>(),
    ) {
        let mut shuffled = errors.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let w = select_winner(&errors).unwrap();
        prop_assert_eq!(select_winner(&shuffled), Some(w));
        let best = errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        let smallest_tied = errors.iter().filter(|e| e.1 == best).map(|e| e.0).min().unwrap();
        prop_assert_eq!(w, smallest_tied);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn early_stopping_keeps_the_best_snapshot(seed in any::<u64>()) {
        let arch = MlpArchitecture::single_hidden(2, 6, Activation::Tanh, linear_out()).unwrap();
        let train_set = regression(20, seed);
        let valid = regression(20, seed ^ 1);
        let config = TrainConfig { restarts: 3, seed, max_iterations: 150, ..TrainConfig::default() };
        let fit = train(&arch, &train_set, &valid, &config).unwrap();
        for &v in &fit.validation_curve {
            prop_assert!(fit.best_validation_error <= v);
        }
        let again = mean_loss(&arch, &fit.weights, &valid, &[]).unwrap();
        prop_assert_eq!(again, fit.best_validation_error);
    }
}

#[test]
fn leave_one_out_on_four_points() {
    let folds = fold_assignments(4, 4, 0).unwrap();
    assert!(folds.iter().all(|f| f.len() == 1));
    assert!(fold_assignments(4, 5, 0).is_err());
}

#[test]
fn sweep_is_order_invariant() {
    let template = ArchTemplate {
        input_dim: 2,
        activation: Activation::Tanh,
        output_blocks: linear_out(),
    };
    let (train_set, valid) = (regression(30, 1), regression(20, 2));
    let config = TrainConfig {
        restarts: 2,
        max_iterations: 100,
        ..TrainConfig::default()
    };
    let a = sweep(&template, &[2, 5, 8], &train_set, &valid, None, &config).unwrap();
    let b = sweep(&template, &[8, 2, 5], &train_set, &valid, None, &config).unwrap();
    assert_eq!(a.hidden_size, b.hidden_size);
    for c in &a.candidates {
        let d = b.candidates.iter().find(|d| d.hidden_size == c.hidden_size).unwrap();
        assert_eq!(c.validation_error, d.validation_error);
    }
    assert_eq!(a.fit.weights, b.fit.weights);
}

#[test]
fn decay_ladder_shrinks_weights() {
    // A network with no hidden layer is ridge regression, so the optimum is unique.
    let arch = MlpArchitecture::new(2, vec![], linear_out()).unwrap();
    let data = regression(40, 3);
    let mut previous = f64::INFINITY;
    for lambda in [0.0, 0.01, 0.1, 1.0, 10.0] {
        let config = TrainConfig {
            restarts: 1,
            gradient_tolerance: 1e-10,
            decay: DecayConfig {
                lambda: vec![lambda],
                ..DecayConfig::default()
            },
            early_stopping: EarlyStopping {
                enabled: false,
                ..EarlyStopping::default()
            },
            ..TrainConfig::default()
        };
        let fit = train(&arch, &data, &data, &config).unwrap();
        let layout = arch.layout();
        let norm: f64 = (0..fit.weights.len())
            .filter(|&i| !layout.is_bias(i))
            .map(|i| fit.weights[i].powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(norm < previous, "lambda {lambda}: |w| = {norm}, previous {previous}");
        previous = norm;
    }
}

#[test]
fn constant_task_has_equal_fold_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let y = vec![vec![0.75]; 20];
    let data = Dataset::from_rows(&x, &y, 1).unwrap();
    let arch = MlpArchitecture::single_hidden(1, 2, Activation::Tanh, linear_out()).unwrap();
    let config = TrainConfig {
        restarts: 2,
        gradient_tolerance: 1e-10,
        ..TrainConfig::default()
    };
    let report = k_fold_cv(&arch, &data, 5, &config).unwrap();
    let (lo, hi) = report
        .fold_errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    assert!(hi - lo <= 1e-9, "fold errors {:?}", report.fold_errors);
}

#[test]
fn five_fold_estimate_agrees_with_a_holdout_split() {
    let stations = generate_synthetic_stations(200, 21, 1.0);
    let raw: Vec<Vec<f64>> = stations.iter().map(|s| apply_coding(s, CodingMethod::MeanSd4)).collect();
    let stats = ColumnStats::fit(raw.iter().map(Vec::as_slice), 4).unwrap();
    let x: Vec<Vec<f64>> = raw.iter().map(|r| stats.transform_row(r)).collect();
    let lat: Vec<f64> = stations.iter().map(|s| s.latitude).collect();
    let mean = lat.iter().sum::<f64>() / lat.len() as f64;
    let sd = (lat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (lat.len() - 1) as f64).sqrt();
    let y: Vec<Vec<f64>> = lat.iter().map(|v| vec![(v - mean) / sd]).collect();
    let data = Dataset::from_rows(&x, &y, 1).unwrap();

    let arch = MlpArchitecture::single_hidden(4, 5, Activation::Tanh, linear_out()).unwrap();
    let config = TrainConfig {
        restarts: 3,
        max_iterations: 300,
        seed: 5,
        ..TrainConfig::default()
    };
    let cv = k_fold_cv(&arch, &data, 5, &config).unwrap();

    let mut idx: Vec<usize> = (0..200).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let (fit_idx, hold_idx) = idx.split_at(140);
    let fit_set = data.select(fit_idx);
    let hold = data.select(hold_idx);
    let fit = train(&arch, &fit_set, &fit_set, &config).unwrap();
    let split_estimate = mean_loss(&arch, &fit.weights, &hold, &[]).unwrap();
    assert!(
        (cv.mean - split_estimate).abs() <= cv.sd,
        "5-fold {:.4} ± {:.4} vs split {:.4}",
        cv.mean,
        cv.sd,
        split_estimate
    );
}
