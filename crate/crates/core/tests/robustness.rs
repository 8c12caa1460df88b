use symbolic_mlp::experiments::{run_experiment, CodingMethod, ExperimentConfig, ExperimentReport};

fn increase(report: &ExperimentReport, m: CodingMethod) -> (f64, f64) {
    let row = report
        .robustness
        .iter()
        .find(|r| r.method == m && r.condition.starts_with("outlier"))
        .unwrap();
    (row.increase_long, row.increase_lat)
}

#[test]
fn outlier_hurts_min_max_more_than_mean_sd() {
    let config = ExperimentConfig {
        methods: vec![CodingMethod::MeanSd4, CodingMethod::MinMax4],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config, None).unwrap().report;
    let (sd_long, sd_lat) = increase(&report, CodingMethod::MeanSd4);
    let (mm_long, mm_lat) = increase(&report, CodingMethod::MinMax4);
    assert!(
        mm_long > sd_long && mm_lat > sd_lat,
        "mean_sd4 {sd_long:+.3}/{sd_lat:+.3}, min_max4 {mm_long:+.3}/{mm_lat:+.3}"
    );
}
