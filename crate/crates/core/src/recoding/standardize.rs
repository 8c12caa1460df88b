use serde::{Deserialize, Serialize};

use super::{BlockKind, ColumnGroup, EncodedMatrix};
use crate::error::{Error, Result};

/// Column means and scales, applied as `(x - mean) / scale`.
///
/// Scales are sample standard deviations (divisor `N - 1`); a constant column
/// gets scale 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnStats {
    pub fn identity(n_cols: usize) -> Self {
        ColumnStats {
            mean: vec![0.0; n_cols],
            scale: vec![1.0; n_cols],
        }
    }

    /// Fits on rows of width `n_cols`. Requires at least two rows.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, n_cols: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len();
        if n < 2 {
            return Err(Error::Config(format!("standardization needs at least 2 rows, got {n}")));
        }
        let mut mean = vec![0.0; n_cols];
        for r in &rows {
            crate::error::check_len(n_cols, r.len(), "standardizer row")?;
            for (m, &x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; n_cols];
        for r in &rows {
            for ((v, &x), &m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / (n - 1) as f64).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(ColumnStats { mean, scale })
    }

    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&z, (&m, &s))| z * s + m)
            .collect()
    }

    /// Keeps the statistics of selected columns, resets the rest to the identity.
    pub fn masked(mut self, keep: &[bool]) -> Self {
        for (j, &k) in keep.iter().enumerate() {
            if !k {
                self.mean[j] = 0.0;
                self.scale[j] = 1.0;
            }
        }
        self
    }
}

fn with_stats(m: &EncodedMatrix, stats: &ColumnStats) -> EncodedMatrix {
    let mut out = m.clone();
    for g in &mut out.groups {
        g.mean = stats.mean[g.columns.clone()].to_vec();
        g.scale = stats.scale[g.columns.clone()].to_vec();
    }
    out
}

/// Returns `m` with every group's mean and scale fitted to its columns.
pub fn fit_standardizer(m: &EncodedMatrix) -> Result<EncodedMatrix> {
    let stats = ColumnStats::fit(m.rows(), m.n_cols)?;
    Ok(with_stats(m, &stats))
}

/// Like [`fit_standardizer`] but only for target columns whose block keeps
/// an unconstrained activation: quantitative values, interval means and log
/// lengths. Probability columns and exponential-activated lengths keep the
/// identity statistics.
pub fn fit_target_standardizer(m: &EncodedMatrix, blocks: &[super::OutputBlockSpec]) -> Result<EncodedMatrix> {
    let mut keep = vec![false; m.n_cols];
    for b in blocks {
        for (k, col) in b.columns.clone().enumerate() {
            keep[col] = match b.kind {
                BlockKind::LinearQuadratic | BlockKind::IntervalMeanLogLength => true,
                BlockKind::IntervalMeanLength => k == 0,
                _ => false,
            };
        }
    }
    let stats = ColumnStats::fit(m.rows(), m.n_cols)?.masked(&keep);
    Ok(with_stats(m, &stats))
}

impl EncodedMatrix {
    pub fn stats(&self) -> ColumnStats {
        ColumnStats {
            mean: self.column_means(),
            scale: self.column_scales(),
        }
    }

    /// Maps every column `c` to `(c - mean) / scale` using the stored statistics.
    pub fn transform(&self) -> EncodedMatrix {
        let stats = self.stats();
        let mut out = self.clone();
        for (i, row) in out.values.chunks_mut(self.n_cols.max(1)).enumerate() {
            if i >= self.n_rows {
                break;
            }
            row.copy_from_slice(&stats.transform_row(self.row(i)));
        }
        out
    }

    pub fn inverse_transform(&self) -> EncodedMatrix {
        let stats = self.stats();
        let mut out = self.clone();
        for (i, row) in out.values.chunks_mut(self.n_cols.max(1)).enumerate() {
            if i >= self.n_rows {
                break;
            }
            row.copy_from_slice(&stats.inverse_row(self.row(i)));
        }
        out
    }

    /// Copies the statistics fitted on `fitted` (same column layout) onto this matrix.
    pub fn with_statistics_of(&self, fitted: &EncodedMatrix) -> Result<EncodedMatrix> {
        let same_layout = self.groups.len() == fitted.groups.len()
            && self
                .groups
                .iter()
                .zip(&fitted.groups)
                .all(|(a, b): (&ColumnGroup, &ColumnGroup)| a.source_variable == b.source_variable && a.columns == b.columns);
        if !same_layout {
            return Err(Error::Schema("column layouts differ; cannot share standardizer".into()));
        }
        Ok(with_stats(self, &fitted.stats()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recoding::CodingTag;

    fn single_column(values: Vec<f64>) -> EncodedMatrix {
        let n = values.len();
        EncodedMatrix::new(
            n,
            1,
            values,
            vec![ColumnGroup {
                source_variable: "x".into(),
                columns: 0..1,
                decay_divisor: 1.0,
                mean: vec![0.0],
                scale: vec![1.0],
                coding: CodingTag::Identity,
                labels: vec!["value".into()],
            }],
        )
        .unwrap()
    }

    #[test]
    fn sample_sd_convention() {
        let m = fit_standardizer(&single_column(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(m.groups[0].mean, vec![2.0]);
        assert_eq!(m.groups[0].scale, vec![1.0]);
        assert_eq!(m.transform().values, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let m = fit_standardizer(&single_column(vec![4.0, 4.0])).unwrap();
        assert_eq!(m.groups[0].scale, vec![1.0]);
        assert_eq!(m.transform().values, vec![0.0, 0.0]);
    }

    #[test]
    fn round_trip() {
        let m = fit_standardizer(&single_column(vec![0.3, -7.0, 12.5, 1e3])).unwrap();
        let back = m.transform().inverse_transform();
        for (a, b) in back.values.iter().zip(&m.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn needs_two_rows() {
        assert!(fit_standardizer(&single_column(vec![1.0])).is_err());
    }
}
