use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_coding, apply_coding_degraded, degrade, generate_synthetic_stations, CodingMethod, Station};
use crate::error::{Error, Result};
use crate::imputation::{DegradationLevel, MONTHS};
use crate::mlp::{count_weights, predict, Activation, MlpArchitecture};
use crate::objective::Dataset;
use crate::recoding::{BlockKind, ColumnStats, OutputBlockSpec};
use crate::selection::{split_indices, sweep, ArchTemplate, Candidate, Split, SplitIndices};
use crate::training::{derive_seed, TrainConfig};

/// Shift added to one month of every test station. The default is a warm
/// spike in July, pushing that month past the station's usual maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierSpec {
    /// 1-based month.
    pub month: usize,
    pub temperature_shift: f64,
    pub precipitation_shift: f64,
}

impl Default for OutlierSpec {
    fn default() -> Self {
        OutlierSpec {
            month: 7,
            temperature_shift: 12.0,
            precipitation_shift: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_stations: usize,
    pub noise_level: f64,
    /// Master seed for the data, the split and every restart.
    pub seed: u64,
    pub methods: Vec<CodingMethod>,
    pub split: Split,
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub train: TrainConfig,
    pub degradation_levels: Vec<DegradationLevel>,
    pub outlier: Option<OutlierSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_stations: 260,
            noise_level: 1.0,
            seed: 7,
            methods: CodingMethod::ALL.to_vec(),
            split: Split::default(),
            hidden_sizes: vec![3, 10, 30],
            hidden_activation: Activation::Tanh,
            train: TrainConfig {
                restarts: 5,
                max_iterations: 500,
                ..TrainConfig::default()
            },
            degradation_levels: DegradationLevel::ALL.to_vec(),
            outlier: Some(OutlierSpec::default()),
        }
    }
}

impl ExperimentConfig {
    /// Eight hidden sizes and ten restarts per size.
    pub fn full_protocol() -> Self {
        let base = ExperimentConfig::default();
        ExperimentConfig {
            hidden_sizes: crate::selection::DEFAULT_HIDDEN_SIZES.to_vec(),
            train: TrainConfig {
                restarts: 10,
                ..base.train.clone()
            },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stations < 10 {
            return Err(Error::Config("at least 10 stations are required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no coding methods selected".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if let Some(o) = self.outlier {
            if !(1..=MONTHS).contains(&o.month) {
                return Err(Error::Config(format!("outlier month {} is not in 1..=12", o.month)));
            }
        }
        self.train.validate()
    }
}

/// One coordinate's network with its target scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateModel {
    pub hidden_size: usize,
    pub architecture: MlpArchitecture,
    pub weights: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
    pub candidates: Vec<Candidate>,
    pub validation_error: f64,
}

impl CoordinateModel {
    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        Ok(predict(&self.architecture, &self.weights, z)?[0] * self.target_scale + self.target_mean)
    }
}

/// Two coordinate networks sharing one input standardizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    pub method: CodingMethod,
    pub input_stats: ColumnStats,
    pub longitude: CoordinateModel,
    pub latitude: CoordinateModel,
}

impl LocationModel {
    pub fn weights(&self) -> usize {
        count_weights(&self.longitude.architecture) + count_weights(&self.latitude.architecture)
    }

    /// `(longitude, latitude)` for an unstandardized input vector.
    pub fn locate(&self, x: &[f64]) -> Result<(f64, f64)> {
        crate::error::check_len(self.input_stats.n_cols(), x.len(), "station input")?;
        let z = self.input_stats.transform_row(x);
        Ok((self.longitude.predict(&z)?, self.latitude.predict(&z)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub method: CodingMethod,
    pub mae_long: f64,
    pub mae_lat: f64,
    pub h_long: usize,
    pub h_lat: usize,
    pub weights: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub method: CodingMethod,
    pub station: usize,
    pub longitude: f64,
    pub latitude: f64,
    pub predicted_longitude: f64,
    pub predicted_latitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationResult {
    pub row: ExperimentRow,
    pub model: LocationModel,
    pub predictions: Vec<Prediction>,
}

fn coordinate_dataset(inputs: &[Vec<f64>], targets: &[f64]) -> Result<Dataset> {
    let ys: Vec<Vec<f64>> = targets.iter().map(|&y| vec![y]).collect();
    Dataset::from_rows(inputs, &ys, 1)
}

fn mean_and_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    let sd = var.sqrt();
    (m, if sd > 0.0 { sd } else { 1.0 })
}

#[allow(clippy::too_many_arguments)]
fn fit_coordinate(
    z_train: &[Vec<f64>],
    z_valid: &[Vec<f64>],
    y_train: &[f64],
    y_valid: &[f64],
    hidden_sizes: &[usize],
    activation: Activation,
    config: &TrainConfig,
    seed: u64,
) -> Result<CoordinateModel> {
    let (mean, scale) = mean_and_sd(y_train);
    let standardize = |v: &[f64]| v.iter().map(|y| (y - mean) / scale).collect::<Vec<f64>>();
    let train = coordinate_dataset(z_train, &standardize(y_train))?;
    let valid = coordinate_dataset(z_valid, &standardize(y_valid))?;
    let template = ArchTemplate {
        input_dim: train.input_dim,
        activation,
        output_blocks: vec![OutputBlockSpec::new("coordinate", 0..1, BlockKind::LinearQuadratic)],
    };
    let cfg = TrainConfig {
        seed,
        ..config.clone()
    };
    let report = sweep(&template, hidden_sizes, &train, &valid, None, &cfg)?;
    Ok(CoordinateModel {
        hidden_size: report.hidden_size,
        architecture: report.architecture,
        weights: report.fit.weights,
        target_mean: mean,
        target_scale: scale,
        candidates: report.candidates,
        validation_error: report.fit.best_validation_error,
    })
}

fn method_seed(master: u64, method: CodingMethod, coordinate: u64) -> u64 {
    let id = CodingMethod::ALL.iter().position(|&m| m == method).expect("known method") as u64;
    derive_seed(master, 100 + 2 * id + coordinate)
}

/// Trains the longitude and latitude networks for one coding method and
/// reports test mean absolute errors in degrees.
pub fn run_location_experiment(
    stations: &[Station],
    split: &SplitIndices,
    method: CodingMethod,
    hidden_sizes: &[usize],
    activation: Activation,
    config: &TrainConfig,
) -> Result<LocationResult> {
    let code = |idx: &[usize]| idx.iter().map(|&i| apply_coding(&stations[i], method)).collect::<Vec<_>>();
    let (x_train, x_valid) = (code(&split.train), code(&split.validation));
    let input_stats = ColumnStats::fit(x_train.iter().map(Vec::as_slice), method.dimension())?;
    let standardize = |x: &[Vec<f64>]| x.iter().map(|r| input_stats.transform_row(r)).collect::<Vec<_>>();
    let (z_train, z_valid) = (standardize(&x_train), standardize(&x_valid));
    let coord = |idx: &[usize], f: fn(&Station) -> f64| idx.iter().map(|&i| f(&stations[i])).collect::<Vec<f64>>();
    let lon = |s: &Station| s.longitude;
    let lat = |s: &Station| s.latitude;

    let (longitude, latitude) = rayon::join(
        || {
            fit_coordinate(
                &z_train,
                &z_valid,
                &coord(&split.train, lon),
                &coord(&split.validation, lon),
                hidden_sizes,
                activation,
                config,
                method_seed(config.seed, method, 0),
            )
        },
        || {
            fit_coordinate(
                &z_train,
                &z_valid,
                &coord(&split.train, lat),
                &coord(&split.validation, lat),
                hidden_sizes,
                activation,
                config,
                method_seed(config.seed, method, 1),
            )
        },
    );
    let model = LocationModel {
        method,
        input_stats,
        longitude: longitude?,
        latitude: latitude?,
    };
    let test: Vec<(usize, Vec<f64>)> = split.test.iter().map(|&i| (i, apply_coding(&stations[i], method))).collect();
    let predictions = locate_all(&model, stations, &test)?;
    let (mae_long, mae_lat) = mae(&predictions);
    Ok(LocationResult {
        row: ExperimentRow {
            method,
            mae_long,
            mae_lat,
            h_long: model.longitude.hidden_size,
            h_lat: model.latitude.hidden_size,
            weights: model.weights(),
        },
        model,
        predictions,
    })
}

fn locate_all(model: &LocationModel, stations: &[Station], inputs: &[(usize, Vec<f64>)]) -> Result<Vec<Prediction>> {
    inputs
        .iter()
        .map(|(i, x)| {
            let (plon, plat) = model.locate(x)?;
            Ok(Prediction {
                method: model.method,
                station: *i,
                longitude: stations[*i].longitude,
                latitude: stations[*i].latitude,
                predicted_longitude: plon,
                predicted_latitude: plat,
            })
        })
        .collect()
}

fn mae(p: &[Prediction]) -> (f64, f64) {
    let n = p.len() as f64;
    let lon = p.iter().map(|q| (q.predicted_longitude - q.longitude).abs()).sum::<f64>() / n;
    let lat = p.iter().map(|q| (q.predicted_latitude - q.latitude).abs()).sum::<f64>() / n;
    (lon, lat)
}

/// Test-time perturbation applied to stations before coding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Degraded(DegradationLevel),
    Outlier(OutlierSpec),
}

impl Condition {
    pub fn name(&self) -> String {
        match self {
            Condition::Clean => "none".into(),
            Condition::Degraded(l) => l.name().into(),
            Condition::Outlier(o) => format!("outlier_m{}", o.month),
        }
    }

    fn code(&self, s: &Station, method: CodingMethod) -> Result<Vec<f64>> {
        match self {
            Condition::Clean => Ok(apply_coding(s, method)),
            Condition::Degraded(l) => apply_coding_degraded(&degrade(s, *l), method),
            Condition::Outlier(o) => Ok(apply_coding(&inject_outlier(s, o), method)),
        }
    }
}

/// Adds the outlier shifts to one month; precipitation stays non-negative.
pub fn inject_outlier(s: &Station, outlier: &OutlierSpec) -> Station {
    let mut out = s.clone();
    let m = outlier.month - 1;
    out.temperatures[m] += outlier.temperature_shift;
    out.precipitations[m] = (out.precipitations[m] + outlier.precipitation_shift).max(0.0);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub method: CodingMethod,
    pub condition: String,
    pub mae_long: f64,
    pub mae_lat: f64,
    /// `mae / clean mae - 1`.
    pub increase_long: f64,
    pub increase_lat: f64,
}

/// Applies every condition to the test stations and reports each trained
/// model's errors. The clean condition always comes first.
pub fn run_degradation_study(
    models: &[LocationModel],
    stations: &[Station],
    test: &[usize],
    conditions: &[Condition],
) -> Result<Vec<RobustnessRow>> {
    let mut all = vec![Condition::Clean];
    all.extend(conditions.iter().filter(|c| **c != Condition::Clean).copied());
    let mut rows = Vec::new();
    for model in models {
        let mut clean = None;
        for c in &all {
            let inputs = test
                .iter()
                .map(|&i| Ok((i, c.code(&stations[i], model.method)?)))
                .collect::<Result<Vec<_>>>()?;
            let (mae_long, mae_lat) = mae(&locate_all(model, stations, &inputs)?);
            let (base_long, base_lat) = *clean.get_or_insert((mae_long, mae_lat));
            rows.push(RobustnessRow {
                method: model.method,
                condition: c.name(),
                mae_long,
                mae_lat,
                increase_long: mae_long / base_long - 1.0,
                increase_lat: mae_lat / base_lat - 1.0,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub split: SplitIndices,
    pub rows: Vec<ExperimentRow>,
    pub robustness: Vec<RobustnessRow>,
    pub models: Vec<LocationModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub stations: Vec<Station>,
    pub predictions: Vec<Prediction>,
}

/// Full pipeline on synthetic stations, or on `stations` when given.
pub fn run_experiment(config: &ExperimentConfig, stations: Option<Vec<Station>>) -> Result<ExperimentOutput> {
    config.validate()?;
    let stations = match stations {
        Some(s) => s,
        None => generate_synthetic_stations(config.n_stations, config.seed, config.noise_level),
    };
    let split = split_indices(stations.len(), &config.split, derive_seed(config.seed, 1))?;
    let results: Vec<Result<LocationResult>> = config
        .methods
        .par_iter()
        .map(|&m| {
            run_location_experiment(
                &stations,
                &split,
                m,
                &config.hidden_sizes,
                config.hidden_activation,
                &config.train,
            )
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let models: Vec<LocationModel> = results.iter().map(|r| r.model.clone()).collect();
    let mut conditions: Vec<Condition> = config.degradation_levels.iter().map(|&l| Condition::Degraded(l)).collect();
    conditions.extend(config.outlier.map(Condition::Outlier));
    let robustness = run_degradation_study(&models, &stations, &split.test, &conditions)?;
    let predictions = results.iter().flat_map(|r| r.predictions.iter().cloned()).collect();
    Ok(ExperimentOutput {
        report: ExperimentReport {
            config: config.clone(),
            split,
            rows: results.into_iter().map(|r| r.row).collect(),
            robustness,
            models,
        },
        stations,
        predictions,
    })
}

/// Fixed-width table: method, errors in degrees, hidden sizes, weight count.
pub fn summary_table(rows: &[ExperimentRow]) -> String {
    let mut s = format!(
        "{:<10} {:>9} {:>9} {:>6} {:>6} {:>8}\n",
        "method", "mae_long", "mae_lat", "h_long", "h_lat", "weights"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>9.3} {:>9.3} {:>6} {:>6} {:>8}",
            r.method.name(),
            r.mae_long,
            r.mae_lat,
            r.h_long,
            r.h_lat,
            r.weights
        );
    }
    s
}

fn to_csv<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> Result<String> {
    to_csv(rows, None)
}

/// `(true, predicted)` coordinate pairs for plotting.
pub fn predictions_csv(rows: &[Prediction]) -> Result<String> {
    to_csv(rows, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n_stations: 40,
            split: Split::Counts {
                train: 20,
                validation: 10,
                test: 10,
            },
            hidden_sizes: vec![2],
            methods: vec![CodingMethod::Mean2, CodingMethod::MeanSd4],
            train: TrainConfig {
                restarts: 2,
                max_iterations: 30,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn report_shape_and_weights() {
        let out = run_experiment(&tiny_config(), None).unwrap();
        assert_eq!(out.report.rows.len(), 2);
        let r = &out.report.rows[1];
        assert_eq!(r.weights, crate::mlp::count_single_hidden(4, r.h_long, 1) + crate::mlp::count_single_hidden(4, r.h_lat, 1));
        assert_eq!(out.predictions.len(), 20);
        // clean + 3 levels + outlier per method
        assert_eq!(out.report.robustness.len(), 10);
    }

    #[test]
    fn clean_condition_matches_experiment() {
        let out = run_experiment(&tiny_config(), None).unwrap();
        for row in &out.report.rows {
            let clean = out
                .report
                .robustness
                .iter()
                .find(|r| r.method == row.method && r.condition == "none")
                .unwrap();
            assert_eq!((clean.mae_long, clean.mae_lat), (row.mae_long, row.mae_lat));
            assert_eq!(clean.increase_long, 0.0);
        }
    }

    #[test]
    fn outlier_shifts_one_month() {
        let s = &generate_synthetic_stations(1, 1, 1.0)[0];
        let o = inject_outlier(s, &OutlierSpec::default());
        assert_eq!(o.temperatures[6], s.temperatures[6] + 12.0);
        assert_eq!(o.temperatures[7], s.temperatures[7]);
    }

    #[test]
    fn table_has_header_and_rows() {
        let rows = vec![ExperimentRow {
            method: CodingMethod::Full24,
            mae_long: 6.57,
            mae_lat: 0.83,
            h_long: 5,
            h_lat: 8,
            weights: 340,
        }];
        let t = summary_table(&rows);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("full24") && t.contains("340"));
    }
}
