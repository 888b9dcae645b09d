use serde::{Deserialize, Serialize};

use super::{DataError, LabelKind, MaskedDataset};
use crate::numeric::Matrix;

/// Per-column min/max over observed training cells, plus the continuous label range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub label_range: Option<(f64, f64)>,
}

/// What happened while applying stats to a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormReport {
    /// Observed cells mapped outside `[0, 1]` (only possible with reused stats).
    pub out_of_range: usize,
}

fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl NormStats {
    pub fn fit(ds: &MaskedDataset) -> Result<Self, DataError> {
        let d = ds.d();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for i in 0..ds.n() {
            for (j, &v) in ds.row(i).iter().enumerate() {
                if ds.is_observed(i, j) {
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
        }
        if let Some(j) = min.iter().position(|v| !v.is_finite()) {
            return Err(DataError::UnobservedColumn(
                ds.columns().feature_names[j].clone(),
            ));
        }
        let label_range = match (ds.label_kind(), ds.labels()) {
            (LabelKind::Continuous, Some(y)) if !y.is_empty() => Some((
                y.iter().copied().fold(f64::INFINITY, f64::min),
                y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )),
            _ => None,
        };
        Ok(Self {
            min,
            max,
            label_range,
        })
    }

    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        unit(v, self.min[j], self.max[j])
    }

    pub fn unscale_value(&self, j: usize, u: f64) -> f64 {
        if self.max[j] > self.min[j] {
            u * (self.max[j] - self.min[j]) + self.min[j]
        } else {
            self.min[j]
        }
    }

    /// Scales every finite cell of a matrix column-wise; NaN stays NaN.
    pub fn scale_matrix(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                if v.is_finite() {
                    *v = self.scale_value(j, *v);
                }
            }
        }
        out
    }

    pub fn unscale_matrix(&self, u: &Matrix) -> Matrix {
        let mut out = u.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                if v.is_finite() {
                    *v = self.unscale_value(j, *v);
                }
            }
        }
        out
    }

    pub fn scale_label(&self, y: f64) -> f64 {
        match self.label_range {
            Some((lo, hi)) => unit(y, lo, hi),
            None => y,
        }
    }

    pub fn unscale_label(&self, u: f64) -> f64 {
        match self.label_range {
            Some((lo, hi)) if hi > lo => u * (hi - lo) + lo,
            Some((lo, _)) => lo,
            None => u,
        }
    }
}

/// Min-max scales observed cells (and continuous labels) to `[0, 1]`.
///
/// With `stats = None` the statistics are fitted on `ds` itself; pass the
/// training split's stats when normalizing a test split.
pub fn normalize(
    ds: &MaskedDataset,
    stats: Option<&NormStats>,
) -> Result<(MaskedDataset, NormStats, NormReport), DataError> {
    let stats = match stats {
        Some(s) => {
            if s.min.len() != ds.d() {
                return Err(DataError::Schema(format!(
                    "normalization stats cover {} columns, dataset has {}",
                    s.min.len(),
                    ds.d()
                )));
            }
            s.clone()
        }
        None => NormStats::fit(ds)?,
    };
    let scaled = stats.scale_matrix(ds.features());
    let out_of_range = scaled
        .data()
        .iter()
        .filter(|v| v.is_finite() && !(0.0..=1.0).contains(*v))
        .count();
    let labels = ds
        .labels()
        .map(|y| y.iter().map(|&v| stats.scale_label(v)).collect());
    Ok((
        ds.with_values(scaled, labels),
        stats,
        NormReport { out_of_range },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Columns, FeatureGroups, PatternPolicy};

    fn ds(rows: &[Vec<f64>]) -> MaskedDataset {
        let x = Matrix::from_rows(rows).unwrap();
        let names: Vec<String> = (0..x.cols()).map(|j| format!("c{j}")).collect();
        MaskedDataset::new(
            x,
            None,
            Columns::new(names.clone(), FeatureGroups::singletons(&names)),
            PatternPolicy::Discover,
        )
        .unwrap()
    }

    #[test]
    fn scales_to_unit_interval() {
        let (out, stats, _) = normalize(
            &ds(&[vec![2.0, 5.0], vec![4.0, 5.0], vec![f64::NAN, 5.0]]),
            None,
        )
        .unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0]);
        assert_eq!(out.row(1), &[1.0, 0.0]);
        assert!(out.row(2)[0].is_nan());
        assert_eq!((stats.min[0], stats.max[0]), (2.0, 4.0));
    }

    #[test]
    fn reused_stats_flag_out_of_range() {
        let stats = NormStats {
            min: vec![0.0],
            max: vec![10.0],
            label_range: None,
        };
        let (out, _, report) = normalize(&ds(&[vec![12.0]]), Some(&stats)).unwrap();
        assert!((out.row(0)[0] - 1.2).abs() < 1e-15);
        assert_eq!(report.out_of_range, 1);
    }

    #[test]
    fn unobserved_column_is_an_error() {
        assert!(matches!(
            NormStats::fit(&ds(&[vec![1.0, f64::NAN]])),
            Err(DataError::UnobservedColumn(_))
        ));
    }
}
