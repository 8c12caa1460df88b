use proptest::prelude::*;

use symbolic_mlp::experiments::{apply_coding_degraded, degrade, CodingMethod, Station};
use symbolic_mlp::imputation::{degrade_series, impute_knn, impute_mean, interpolate_periodic, DegradationLevel};

fn level() -> impl Strategy<Value = DegradationLevel> {
    prop::sample::select(DegradationLevel::ALL.to_vec())
}

/// Matrices with at least one observed entry per column.
fn partial_matrix() -> impl Strategy<Value = Vec<Vec<Option<f64>>>> {
    (1usize..5, 2usize..9).prop_flat_map(|(w, n)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, -50.0f64..50.0), w), n).prop_map(
            move |mut m| {
                for j in 0..w {
                    if m.iter().all(|r| r[j].is_none()) {
                        m[0][j] = Some(1.0);
                    }
                }
                m
            },
        )
    })
}

proptest! {
    #[test]
    fn imputation_keeps_observed_entries(m in partial_matrix(), k in 1usize..4) {
        for filled in [impute_mean(&m).unwrap(), impute_knn(&m, k).unwrap()] {
            for (row, out) in m.iter().zip(&filled) {
                for (v, x) in row.iter().zip(out) {
                    prop_assert!(x.is_finite());
                    if let Some(v) = v {
                        prop_assert_eq!(v, x);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_series_interpolate_to_the_constant(c in -100.0f64..100.0, level in level()) {
        let r = interpolate_periodic(&degrade_series(&[c; 12], level), level).unwrap();
        for x in r {
            prop_assert!((x - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn affine_gaps_are_reconstructed(a in -10.0f64..10.0, b in -5.0f64..5.0, level in level()) {
        let v: [f64; 12] = std::array::from_fn(|i| a + b * i as f64);
        let r = interpolate_periodic(&degrade_series(&v, level), level).unwrap();
        let last_kept = *level.surviving_months().last().unwrap();
        // Slots after the last surviving month wrap around to January.
        for i in 0..last_kept {
            prop_assert!((r[i] - v[i]).abs() <= 1e-12 * v[i].abs().max(1.0), "month {}: {} vs {}", i + 1, r[i], v[i]);
        }
    }

    #[test]
    fn surviving_mean_of_constant_station(t in -30.0f64..30.0, p in 0.0f64..300.0, level in level()) {
        let s = Station { longitude: 100.0, latitude: 30.0, temperatures: [t; 12], precipitations: [p; 12] };
        let coded = apply_coding_degraded(&degrade(&s, level), CodingMethod::Mean2).unwrap();
        prop_assert!((coded[0] - t).abs() <= 1e-12 * t.abs().max(1.0));
        prop_assert!((coded[1] - p).abs() <= 1e-12 * p.abs().max(1.0));
    }
}
