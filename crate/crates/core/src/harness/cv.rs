use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, rmse, rmse_imputation};
use super::HarnessError;
use crate::data::{normalize, stratified_folds, LabelKind, MaskedDataset};
use crate::engine::{train, FragmganConfig};
use crate::seed::derive;

const FOLD_STREAM: u64 = 11;
const TRAIN_STREAM: u64 = 12;
const SCORE_STREAM: u64 = 13;

/// `{0.40, 0.41, …, 0.60}`.
pub fn default_grid() -> Vec<f64> {
    (40..=60).map(|i| i as f64 / 100.0).collect()
}

fn default_folds() -> usize {
    5
}

/// What a held-out fold is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvCriterion {
    /// Label prediction: AUC for binary labels, RMSE for continuous ones.
    #[default]
    Prediction,
    /// Imputation RMSE against the complete data; needs ground truth.
    Imputation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub criterion: CvCriterion,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            folds: default_folds(),
            criterion: CvCriterion::Prediction,
        }
    }
}

impl CvSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.grid.is_empty() {
            return Err(HarnessError::Config("gamma grid is empty".into()));
        }
        if let Some(g) = self.grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(HarnessError::Config(format!(
                "gamma grid value {g} outside [0, 1]"
            )));
        }
        if self.folds < 2 {
            return Err(HarnessError::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScore {
    pub gamma: f64,
    pub mean: f64,
    pub folds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub gamma: f64,
    /// Name of the fold score, e.g. `auc`.
    pub score: String,
    pub higher_is_better: bool,
    pub scores: Vec<GammaScore>,
}

/// Picks the grid value with the best mean held-out score; ties go to the
/// larger gamma. Every grid value sees the same folds and training seeds.
/// `truth` is the complete counterpart of `ds`, needed only for the
/// imputation criterion.
pub fn cross_validate_gamma(
    ds: &MaskedDataset,
    truth: Option<&MaskedDataset>,
    cfg: &FragmganConfig,
    cv: &CvSpec,
    seed: u64,
) -> Result<CvReport, HarnessError> {
    cv.validate()?;
    let (score, higher_is_better) = match cv.criterion {
        CvCriterion::Prediction => {
            if ds.labels().is_none() {
                return Err(HarnessError::Config(
                    "prediction criterion needs labels".into(),
                ));
            }
            match ds.label_kind() {
                LabelKind::Binary => ("auc", true),
                LabelKind::Continuous => ("rmse_label", false),
            }
        }
        CvCriterion::Imputation => {
            let t = truth.ok_or_else(|| {
                HarnessError::Config("imputation criterion needs complete data".into())
            })?;
            if t.n() != ds.n() || t.d() != ds.d() {
                return Err(HarnessError::Config(
                    "complete data does not match the training rows".into(),
                ));
            }
            ("rmse_impute", false)
        }
    };
    let folds = stratified_folds(ds, cv.folds, derive(seed, FOLD_STREAM, 0))?;
    let batch = cfg.batch_g.max(cfg.batch_d).max(cfg.batch_p);
    let complements: Vec<Vec<usize>> = folds
        .iter()
        .map(|held| {
            (0..ds.n())
                .filter(|i| held.binary_search(i).is_err())
                .collect()
        })
        .collect();
    for (fold, rows) in complements.iter().enumerate() {
        if rows.len() < batch {
            return Err(HarnessError::FoldTooSmall {
                fold,
                rows: rows.len(),
                batch,
            });
        }
    }

    let tasks: Vec<(usize, usize)> = (0..cv.grid.len())
        .flat_map(|g| (0..folds.len()).map(move |f| (g, f)))
        .collect();
    let results: Vec<Result<f64, HarnessError>> = tasks
        .par_iter()
        .map(|&(g, f)| {
            let cfg = FragmganConfig {
                gamma: cv.grid[g],
                seed: derive(seed, TRAIN_STREAM, f as u64),
                ..cfg.clone()
            };
            let model = train(&ds.subset(&complements[f]), &cfg)?;
            let held = ds.subset(&folds[f]);
            let draw = derive(seed, SCORE_STREAM, f as u64);
            match cv.criterion {
                CvCriterion::Prediction => {
                    let pred = model.predict(&held, draw)?;
                    let y = held.labels().expect("labels checked above");
                    if higher_is_better {
                        auc(&pred, y)
                    } else {
                        rmse(y, &pred)
                    }
                }
                CvCriterion::Imputation => {
                    let imputed = model.impute_normalized(&held, draw)?;
                    let complete = truth.expect("truth checked above").subset(&folds[f]);
                    let (scaled, _, _) = normalize(&complete, Some(&model.norm_stats))?;
                    rmse_imputation(scaled.features(), &imputed, &held.mask_matrix())
                }
            }
        })
        .collect();

    let mut scores: Vec<GammaScore> = cv
        .grid
        .iter()
        .map(|&gamma| GammaScore {
            gamma,
            mean: 0.0,
            folds: Vec::with_capacity(folds.len()),
        })
        .collect();
    for (&(g, _), r) in tasks.iter().zip(results) {
        scores[g].folds.push(r?);
    }
    for s in &mut scores {
        s.mean = s.folds.iter().sum::<f64>() / s.folds.len() as f64;
    }
    let better = |a: &GammaScore, b: &GammaScore| {
        if a.mean == b.mean {
            a.gamma > b.gamma
        } else if higher_is_better {
            a.mean > b.mean
        } else {
            a.mean < b.mean
        }
    };
    let best = scores
        .iter()
        .reduce(|best, s| if better(s, best) { s } else { best })
        .expect("grid is non-empty");
    Ok(CvReport {
        gamma: best.gamma,
        score: score.into(),
        higher_is_better,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_21_points() {
        let g = default_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.40);
        assert_eq!(g[20], 0.60);
        assert!((g[1] - 0.41).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(CvSpec::default().validate().is_ok());
        let empty = CvSpec {
            grid: vec![],
            ..Default::default()
        };
        assert!(empty.validate().is_err());
        let outside = CvSpec {
            grid: vec![1.2],
            ..Default::default()
        };
        assert!(outside.validate().is_err());
    }
}
