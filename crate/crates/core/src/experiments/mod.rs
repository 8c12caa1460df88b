//! Station-location experiments: summarizing monthly climate series in four
//! ways, inferring longitude and latitude from each summary, and measuring
//! robustness when months are removed.

mod climate;
mod protocol;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::{degrade_series, interpolate_periodic, DegradationLevel, MONTHS};

pub use climate::{climate_normals, generate_synthetic_stations, ClimateNormals};
pub use protocol::{
    inject_outlier, robustness_csv, predictions_csv, run_degradation_study, run_experiment, run_location_experiment,
    summary_table, Condition, CoordinateModel, ExperimentConfig, ExperimentOutput, ExperimentReport, ExperimentRow,
    LocationModel, LocationResult, OutlierSpec, Prediction, RobustnessRow,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub longitude: f64,
    pub latitude: f64,
    pub temperatures: [f64; MONTHS],
    pub precipitations: [f64; MONTHS],
}

impl Station {
    pub fn validate(&self) -> Result<()> {
        let all = [self.longitude, self.latitude]
            .into_iter()
            .chain(self.temperatures)
            .chain(self.precipitations);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("station values must be finite".into()));
        }
        if self.precipitations.iter().any(|&p| p < 0.0) {
            return Err(Error::Config("precipitation must be non-negative".into()));
        }
        Ok(())
    }
}

/// A station with some monthly values removed.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradedStation {
    pub longitude: f64,
    pub latitude: f64,
    pub temperatures: [Option<f64>; MONTHS],
    pub precipitations: [Option<f64>; MONTHS],
    pub level: DegradationLevel,
}

pub fn degrade(s: &Station, level: DegradationLevel) -> DegradedStation {
    DegradedStation {
        longitude: s.longitude,
        latitude: s.latitude,
        temperatures: degrade_series(&s.temperatures, level),
        precipitations: degrade_series(&s.precipitations, level),
        level,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodingMethod {
    /// The 24 monthly values.
    #[serde(rename = "full24")]
    Full24,
    /// Mean temperature and mean precipitation.
    #[serde(rename = "mean2")]
    Mean2,
    /// Mean and standard deviation of each series.
    #[serde(rename = "mean_sd4")]
    MeanSd4,
    /// Minimum and maximum of each series.
    #[serde(rename = "min_max4")]
    MinMax4,
}

impl CodingMethod {
    pub const ALL: [CodingMethod; 4] = [
        CodingMethod::Full24,
        CodingMethod::Mean2,
        CodingMethod::MeanSd4,
        CodingMethod::MinMax4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodingMethod::Full24 => "full24",
            CodingMethod::Mean2 => "mean2",
            CodingMethod::MeanSd4 => "mean_sd4",
            CodingMethod::MinMax4 => "min_max4",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            CodingMethod::Full24 => 2 * MONTHS,
            CodingMethod::Mean2 => 2,
            CodingMethod::MeanSd4 | CodingMethod::MinMax4 => 4,
        }
    }

    pub fn column_names(self) -> Vec<String> {
        match self {
            CodingMethod::Full24 => (1..=MONTHS)
                .map(|m| format!("t{m}"))
                .chain((1..=MONTHS).map(|m| format!("p{m}")))
                .collect(),
            CodingMethod::Mean2 => vec!["temp_mean".into(), "precip_mean".into()],
            CodingMethod::MeanSd4 => ["temp_mean", "temp_sd", "precip_mean", "precip_sd"].map(String::from).to_vec(),
            CodingMethod::MinMax4 => ["temp_min", "temp_max", "precip_min", "precip_max"].map(String::from).to_vec(),
        }
    }
}

impl fmt::Display for CodingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CodingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown coding method `{s}` (expected full24, mean2, mean_sd4 or min_max4)")))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation, divisor `n - 1`.
fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(t: &[f64], p: &[f64], method: CodingMethod) -> Vec<f64> {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match method {
        CodingMethod::Full24 => t.iter().chain(p).copied().collect(),
        CodingMethod::Mean2 => vec![mean(t), mean(p)],
        CodingMethod::MeanSd4 => vec![mean(t), sample_sd(t), mean(p), sample_sd(p)],
        CodingMethod::MinMax4 => vec![min(t), max(t), min(p), max(p)],
    }
}

/// Input vector of a complete station.
pub fn apply_coding(s: &Station, method: CodingMethod) -> Vec<f64> {
    summarize(&s.temperatures, &s.precipitations, method)
}

/// Input vector of a degraded station: the 24 values are rebuilt by periodic
/// interpolation, the summaries are recomputed from the surviving months.
pub fn apply_coding_degraded(s: &DegradedStation, method: CodingMethod) -> Result<Vec<f64>> {
    if method == CodingMethod::Full24 {
        let t = interpolate_periodic(&s.temperatures, s.level)?;
        let p = interpolate_periodic(&s.precipitations, s.level)?;
        return Ok(summarize(&t, &p, method));
    }
    let t: Vec<f64> = s.temperatures.iter().flatten().copied().collect();
    let p: Vec<f64> = s.precipitations.iter().flatten().copied().collect();
    Ok(summarize(&t, &p, method))
}

fn station_header() -> Vec<String> {
    ["lon", "lat"]
        .map(String::from)
        .into_iter()
        .chain((1..=MONTHS).map(|m| format!("t{m}")))
        .chain((1..=MONTHS).map(|m| format!("p{m}")))
        .collect()
}

/// CSV with header `lon,lat,t1..t12,p1..p12`.
pub fn stations_to_csv(stations: &[Station]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(station_header())?;
    for s in stations {
        let row = [s.longitude, s.latitude]
            .into_iter()
            .chain(s.temperatures)
            .chain(s.precipitations)
            .map(|x| x.to_string());
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn stations_from_csv(text: &str) -> Result<Vec<Station>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != station_header() {
        return Err(Error::parse(
            None,
            None,
            format!("expected header {}", station_header().join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let x: f64 = cell
                .parse()
                .map_err(|_| Error::parse(Some(i), Some(&station_header()[j]), format!("`{cell}` is not a number")))?;
            vals.push(x);
        }
        let s = Station {
            longitude: vals[0],
            latitude: vals[1],
            temperatures: vals[2..2 + MONTHS].try_into().expect("12 values"),
            precipitations: vals[2 + MONTHS..].try_into().expect("12 values"),
        };
        s.validate().map_err(|e| Error::parse(Some(i), None, e.to_string()))?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn station(t: [f64; 12], p: [f64; 12]) -> Station {
        Station {
            longitude: 100.0,
            latitude: 30.0,
            temperatures: t,
            precipitations: p,
        }
    }

    fn one_to_twelve() -> [f64; 12] {
        std::array::from_fn(|i| (i + 1) as f64)
    }

    #[test]
    fn constant_series() {
        let s = station([4.0; 12], [1.0; 12]);
        assert_eq!(&apply_coding(&s, CodingMethod::MeanSd4)[..2], &[4.0, 0.0]);
        assert_eq!(&apply_coding(&s, CodingMethod::MinMax4)[..2], &[4.0, 4.0]);
    }

    #[test]
    fn one_to_twelve_summaries() {
        let s = station(one_to_twelve(), [0.0; 12]);
        assert_eq!(&apply_coding(&s, CodingMethod::MinMax4)[..2], &[1.0, 12.0]);
        let ms = apply_coding(&s, CodingMethod::MeanSd4);
        assert_eq!(ms[0], 6.5);
        assert!((ms[1] - 13f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dimensions() {
        let s = station(one_to_twelve(), one_to_twelve());
        for m in CodingMethod::ALL {
            assert_eq!(apply_coding(&s, m).len(), m.dimension());
            assert_eq!(m.column_names().len(), m.dimension());
            assert_eq!(m.name().parse::<CodingMethod>().unwrap(), m);
        }
    }

    #[test]
    fn degraded_constant_mean() {
        let s = station([3.5; 12], [2.0; 12]);
        for level in DegradationLevel::ALL {
            let d = degrade(&s, level);
            let v = apply_coding_degraded(&d, CodingMethod::Mean2).unwrap();
            assert_eq!(v, vec![3.5, 2.0]);
        }
    }

    #[test]
    fn degraded_pattern() {
        let s = station(one_to_twelve(), one_to_twelve());
        let d = degrade(&s, DegradationLevel::TwoThirds);
        let kept: Vec<usize> = (0..12).filter(|&i| d.temperatures[i].is_some()).map(|i| i + 1).collect();
        assert_eq!(kept, vec![1, 4, 7, 10]);
    }

    #[test]
    fn csv_round_trip() {
        let s = station(std::array::from_fn(|i| i as f64 * 0.1 - 3.3), [0.7; 12]);
        let text = stations_to_csv(std::slice::from_ref(&s)).unwrap();
        assert!(text.starts_with("lon,lat,t1,"));
        assert_eq!(stations_from_csv(&text).unwrap(), vec![s]);
    }

    #[test]
    fn csv_rejects_bad_cells() {
        let mut text = stations_to_csv(&[station([0.0; 12], [0.0; 12])]).unwrap();
        text = text.replacen("100,", "east,", 1);
        assert!(stations_from_csv(&text).is_err());
    }
}
