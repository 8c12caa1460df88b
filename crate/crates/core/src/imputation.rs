//! Filling missing entries: column means, k nearest neighbours, and periodic
//! linear interpolation of regularly degraded monthly series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows of optional values; `None` is a missing entry.
pub type PartialMatrix = [Vec<Option<f64>>];

fn width(m: &PartialMatrix) -> Result<usize> {
    let w = m.first().map_or(0, Vec::len);
    for r in m {
        crate::error::check_len(w, r.len(), "matrix row")?;
    }
    Ok(w)
}

/// Column means of observed entries; NaN for a column with none.
fn column_means(m: &PartialMatrix, w: usize) -> Vec<f64> {
    (0..w)
        .map(|j| {
            let (sum, count) = m
                .iter()
                .filter_map(|r| r[j])
                .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        })
        .collect()
}

fn mean_for(means: &[f64], j: usize) -> Result<f64> {
    let mu = means[j];
    if mu.is_nan() {
        return Err(Error::Imputation(format!("column {j} has no observed entries")));
    }
    Ok(mu)
}

/// Replaces every missing entry by the mean of the observed entries of its column.
pub fn impute_mean(m: &PartialMatrix) -> Result<Vec<Vec<f64>>> {
    let w = width(m)?;
    let means = column_means(m, w);
    m.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| v.map_or_else(|| mean_for(&means, j), Ok))
                .collect()
        })
        .collect()
}

/// Root mean squared difference over coordinates observed in both rows,
/// `None` when they share none.
fn shared_distance(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let (sum, count) = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).powi(2)))
        .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// Replaces each missing entry by the mean of that coordinate over the `k`
/// nearest rows observing it. Distances use the coordinates both rows
/// observe, normalized by their count; ties go to the lower row index.
/// Cells with fewer than `k` donors fall back to the column mean.
pub fn impute_knn(m: &PartialMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let w = width(m)?;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(m.len());
    let mut means: Option<Vec<f64>> = None;
    for (r, row) in m.iter().enumerate() {
        if row.iter().all(Option::is_some) {
            out.push(row.iter().map(|v| v.expect("complete row")).collect());
            continue;
        }
        let mut neighbours: Vec<(f64, usize)> = m
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != r)
            .filter_map(|(s, other)| shared_distance(row, other).map(|d| (d, s)))
            .collect();
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut filled = Vec::with_capacity(w);
        for (j, v) in row.iter().enumerate() {
            if let Some(x) = v {
                filled.push(*x);
                continue;
            }
            let donors: Vec<f64> = neighbours.iter().filter_map(|&(_, s)| m[s][j]).take(k).collect();
            if donors.len() == k {
                filled.push(donors.iter().sum::<f64>() / k as f64);
            } else {
                log::warn!("row {r}, column {j}: {} of {k} neighbours available, using the column mean", donors.len());
                let means = means.get_or_insert_with(|| column_means(m, w));
                let mu = mean_for(means, j)?;
                filled.push(mu);
            }
        }
        out.push(filled);
    }
    Ok(out)
}

pub const MONTHS: usize = 12;

/// Regular removal of monthly coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationLevel {
    /// One month out of two missing.
    Half,
    /// Two months out of three missing.
    TwoThirds,
    /// Three months out of four missing.
    ThreeQuarters,
}

impl DegradationLevel {
    pub const ALL: [DegradationLevel; 3] = [
        DegradationLevel::Half,
        DegradationLevel::TwoThirds,
        DegradationLevel::ThreeQuarters,
    ];

    /// Distance between surviving months.
    pub fn stride(self) -> usize {
        match self {
            DegradationLevel::Half => 2,
            DegradationLevel::TwoThirds => 3,
            DegradationLevel::ThreeQuarters => 4,
        }
    }

    /// Surviving months, 1-based.
    pub fn surviving_months(self) -> Vec<usize> {
        (1..=MONTHS).step_by(self.stride()).collect()
    }

    /// Missing months, 1-based.
    pub fn missing_months(self) -> Vec<usize> {
        (1..=MONTHS).filter(|m| (m - 1) % self.stride() != 0).collect()
    }

    pub fn is_missing(self, month_index: usize) -> bool {
        !month_index.is_multiple_of(self.stride())
    }

    pub fn name(self) -> &'static str {
        match self {
            DegradationLevel::Half => "half",
            DegradationLevel::TwoThirds => "two_thirds",
            DegradationLevel::ThreeQuarters => "three_quarters",
        }
    }
}

impl fmt::Display for DegradationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DegradationLevel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown degradation level `{s}`")))
    }
}

/// Removes the level's months from a 12-month series.
pub fn degrade_series(v: &[f64; MONTHS], level: DegradationLevel) -> [Option<f64>; MONTHS] {
    std::array::from_fn(|i| (!level.is_missing(i)).then_some(v[i]))
}

/// Linear interpolation across each gap between surviving months, wrapping
/// from the last surviving month back to the first.
///
/// A slot `d` months after its left neighbour `L`, in a gap of `s` months
/// closed by `R`, becomes `((s - d) L + d R) / s`.
pub fn interpolate_periodic(v: &[Option<f64>], level: DegradationLevel) -> Result<[f64; MONTHS]> {
    crate::error::check_len(MONTHS, v.len(), "monthly series")?;
    for (i, x) in v.iter().enumerate() {
        if x.is_none() != level.is_missing(i) {
            return Err(Error::Imputation(format!(
                "month {} does not follow the {level} degradation pattern",
                i + 1
            )));
        }
    }
    let s = level.stride();
    let mut out = [0.0; MONTHS];
    for start in (0..MONTHS).step_by(s) {
        let left = v[start].expect("surviving month");
        let right = v[(start + s) % MONTHS].expect("surviving month");
        out[start] = left;
        for d in 1..s {
            out[start + d] = ((s - d) as f64 * left + d as f64 * right) / s as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_examples() {
        let m = vec![vec![Some(1.0)], vec![None], vec![Some(3.0)]];
        assert_eq!(impute_mean(&m).unwrap(), vec![vec![1.0], vec![2.0], vec![3.0]]);
        let m = vec![vec![Some(5.0)], vec![None]];
        assert_eq!(impute_mean(&m).unwrap(), vec![vec![5.0], vec![5.0]]);
        let full = vec![vec![Some(1.0), Some(2.0)]];
        assert_eq!(impute_mean(&full).unwrap(), vec![vec![1.0, 2.0]]);
        assert!(impute_mean(&[vec![None], vec![None]]).is_err());
    }

    #[test]
    fn knn_copies_nearest() {
        let m = vec![
            vec![Some(0.0), Some(0.0), Some(7.0)],
            vec![Some(5.0), Some(5.0), Some(1.0)],
            vec![Some(0.0), Some(0.0), None],
        ];
        assert_eq!(impute_knn(&m, 1).unwrap()[2], vec![0.0, 0.0, 7.0]);
    }

    #[test]
    fn knn_averages_equidistant_donors() {
        let m = vec![
            vec![Some(1.0), Some(2.0)],
            vec![Some(-1.0), Some(4.0)],
            vec![Some(0.0), None],
        ];
        assert_eq!(impute_knn(&m, 2).unwrap()[2][1], 3.0);
    }

    #[test]
    fn knn_falls_back_to_mean() {
        let m = vec![vec![Some(1.0), Some(2.0)], vec![Some(0.0), None]];
        assert_eq!(impute_knn(&m, 3).unwrap()[1][1], 2.0);
    }

    #[test]
    fn patterns() {
        assert_eq!(DegradationLevel::Half.surviving_months(), vec![1, 3, 5, 7, 9, 11]);
        assert_eq!(DegradationLevel::Half.missing_months(), vec![2, 4, 6, 8, 10, 12]);
        assert_eq!(DegradationLevel::TwoThirds.surviving_months(), vec![1, 4, 7, 10]);
        assert_eq!(DegradationLevel::TwoThirds.missing_months(), vec![2, 3, 5, 6, 8, 9, 11, 12]);
        assert_eq!(DegradationLevel::ThreeQuarters.surviving_months(), vec![1, 5, 9]);
        assert_eq!(DegradationLevel::ThreeQuarters.missing_months(), vec![2, 3, 4, 6, 7, 8, 10, 11, 12]);
    }

    fn series(level: DegradationLevel, known: &[(usize, f64)]) -> Vec<Option<f64>> {
        let mut v = vec![None; MONTHS];
        for m in level.surviving_months() {
            v[m - 1] = Some(0.0);
        }
        for &(m, x) in known {
            v[m - 1] = Some(x);
        }
        v
    }

    #[test]
    fn interpolation_examples() {
        let v = series(DegradationLevel::Half, &[(1, 10.0), (3, 14.0)]);
        assert_eq!(interpolate_periodic(&v, DegradationLevel::Half).unwrap()[1], 12.0);
        let v = series(DegradationLevel::TwoThirds, &[(1, 3.0), (4, 6.0)]);
        let out = interpolate_periodic(&v, DegradationLevel::TwoThirds).unwrap();
        assert_eq!((out[1], out[2]), (4.0, 5.0));
        let v = series(DegradationLevel::ThreeQuarters, &[(1, 0.0), (5, 4.0)]);
        let out = interpolate_periodic(&v, DegradationLevel::ThreeQuarters).unwrap();
        assert_eq!((out[1], out[2], out[3]), (1.0, 2.0, 3.0));
    }

    #[test]
    fn december_wraps_to_january() {
        let v = series(DegradationLevel::Half, &[(1, 2.0), (11, 6.0)]);
        assert_eq!(interpolate_periodic(&v, DegradationLevel::Half).unwrap()[11], 4.0);
    }

    #[test]
    fn pattern_mismatch() {
        let v = vec![Some(1.0); MONTHS];
        assert!(interpolate_periodic(&v, DegradationLevel::Half).is_err());
    }

    #[test]
    fn level_names_round_trip() {
        for l in DegradationLevel::ALL {
            assert_eq!(l.name().parse::<DegradationLevel>().unwrap(), l);
        }
    }
}
