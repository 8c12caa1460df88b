use proptest::prelude::*;

use symbolic_mlp::recoding::{encode_table, encode_value, CodingModes, CodingTag, ColumnStats};
use symbolic_mlp::symbolic::{parse_table, table_to_json, SymbolicTable, SymbolicValue, VariableSpec};

fn labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("A{i}")).collect()
}

/// Variable kinds 0..5: quantitative, categorical, interval, multi-valued, modal.
fn column(kind: usize, m: usize, n: usize) -> impl Strategy<Value = (VariableSpec, Vec<SymbolicValue>)> {
    let name = format!("v{kind}_{m}");
    match kind {
        0 => prop::collection::vec(-1e3f64..1e3, n)
            .prop_map(move |v| (VariableSpec::quantitative(name.clone()), v.into_iter().map(SymbolicValue::Number).collect()))
            .boxed(),
        1 => prop::collection::vec(0..m, n)
            .prop_map(move |v| {
                (VariableSpec::categorical(name.clone(), labels(m)), v.into_iter().map(SymbolicValue::Category).collect())
            })
            .boxed(),
        2 => prop::collection::vec((-1e3f64..1e3, 0.0f64..50.0), n)
            .prop_map(move |v| {
                (
                    VariableSpec::interval(name.clone()),
                    v.into_iter().map(|(a, d)| SymbolicValue::interval(a, a + d)).collect(),
                )
            })
            .boxed(),
        3 => prop::collection::vec(prop::collection::btree_set(0..m, 1..=m), n)
            .prop_map(move |v| {
                (VariableSpec::multi_valued(name.clone(), labels(m)), v.into_iter().map(SymbolicValue::CategorySet).collect())
            })
            .boxed(),
        _ => prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), n)
            .prop_map(move |v| {
                let values = v
                    .into_iter()
                    .map(|raw| {
                        let s: f64 = raw.iter().sum();
                        SymbolicValue::distribution(raw.iter().map(|r| r / s).collect())
                    })
                    .collect();
                (VariableSpec::modal(name.clone(), labels(m)), values)
            })
            .boxed(),
    }
}

fn table() -> impl Strategy<Value = SymbolicTable> {
    (2usize..8, prop::collection::vec((0usize..5, 2usize..7), 1..5)).prop_flat_map(|(n, kinds)| {
        kinds
            .into_iter()
            .map(|(k, m)| column(k, m, n))
            .collect::<Vec<_>>()
            .prop_map(move |cols| {
                let mut specs = Vec::new();
                let mut rows = vec![Vec::new(); n];
                for (j, (mut spec, values)) in cols.into_iter().enumerate() {
                    spec.name = format!("{}_{j}", spec.name);
                    specs.push(spec);
                    for (r, v) in values.into_iter().enumerate() {
                        rows[r].push(v);
                    }
                }
                SymbolicTable::new(specs, rows).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn groups_partition_columns_with_category_divisors(t in table()) {
        let m = encode_table(&t, &CodingModes::new()).unwrap();
        let mut next = 0;
        for g in &m.groups {
            prop_assert_eq!(g.columns.start, next);
            next = g.columns.end;
            let spec = t.specs().iter().find(|s| s.name == g.source_variable).unwrap();
            let expected = if g.coding.is_category_like() { spec.category_count() as f64 } else { 1.0 };
            prop_assert_eq!(g.decay_divisor, expected);
            prop_assert_eq!(g.width(), g.coding.width(spec));
        }
        prop_assert_eq!(next, m.n_cols);
    }

    #[test]
    fn json_round_trip(t in table()) {
        let back = parse_table(&table_to_json(&t)).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn accepted_distributions_sum_to_one(t in table()) {
        for row in t.rows() {
            for v in row {
                if let SymbolicValue::Distribution { probs, .. } = v {
                    prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn standardize_round_trip(rows in (1usize..6).prop_flat_map(|w| prop::collection::vec(prop::collection::vec(-100.0f64..100.0, w), 2..12))) {
        let w = rows[0].len();
        let stats = ColumnStats::fit(rows.iter().map(Vec::as_slice), w).unwrap();
        for r in &rows {
            let back = stats.inverse_row(&stats.transform_row(r));
            for (x, y) in r.iter().zip(&back) {
                prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn disjunctive_codes_are_orthonormal(m in 1usize..15, i in 0usize..15, j in 0usize..15) {
        let (i, j) = (i % m, j % m);
        let spec = VariableSpec::categorical("c", labels(m));
        let a = encode_value(&spec, &SymbolicValue::Category(i), CodingTag::Disjunctive).unwrap();
        let b = encode_value(&spec, &SymbolicValue::Category(j), CodingTag::Disjunctive).unwrap();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        prop_assert_eq!(dot, if i == j { 1.0 } else { 0.0 });
    }
}
