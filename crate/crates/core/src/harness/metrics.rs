use super::HarnessError;
use crate::data::MaskedDataset;
use crate::numeric::Matrix;

/// Root mean squared error over the cells where `mask` is 0.
pub fn rmse_imputation(
    truth: &Matrix,
    imputed: &Matrix,
    mask: &Matrix,
) -> Result<f64, HarnessError> {
    if truth.shape() != imputed.shape() || truth.shape() != mask.shape() {
        return Err(HarnessError::Metric(format!(
            "shape mismatch: truth {:?}, imputed {:?}, mask {:?}",
            truth.shape(),
            imputed.shape(),
            mask.shape()
        )));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for ((&t, &v), &m) in truth.data().iter().zip(imputed.data()).zip(mask.data()) {
        if m == 0.0 {
            sum += (v - t).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(HarnessError::Metric("no missing cells to score".into()));
    }
    Ok((sum / count as f64).sqrt())
}

pub fn rmse(truth: &[f64], predicted: &[f64]) -> Result<f64, HarnessError> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(HarnessError::Metric(format!(
            "rmse needs equal non-empty inputs, got {} and {}",
            truth.len(),
            predicted.len()
        )));
    }
    let sum: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (p - t).powi(2))
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, HarnessError> {
    if scores.len() != labels.len() {
        return Err(HarnessError::Metric(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(v) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(HarnessError::Metric(format!("label {v} is not 0 or 1")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(HarnessError::Metric("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&v| v == 1.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(HarnessError::Metric("auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * order[i..j].iter().filter(|&&r| labels[r] == 1.0).count() as f64;
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Per-column mean of observed cells.
pub fn column_means(ds: &MaskedDataset) -> Result<Vec<f64>, HarnessError> {
    let mut sums = vec![0.0; ds.d()];
    let mut counts = vec![0usize; ds.d()];
    for i in 0..ds.n() {
        for (j, &v) in ds.row(i).iter().enumerate() {
            if ds.is_observed(i, j) {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(j, (&s, &c))| {
            if c == 0 {
                Err(HarnessError::Metric(format!(
                    "column {:?} has no observed cells",
                    ds.columns().feature_names[j]
                )))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

/// Fills every missing cell of `ds` with the matching entry of `means`.
pub fn mean_impute(ds: &MaskedDataset, means: &[f64]) -> Matrix {
    let mut out = ds.features().clone();
    for i in 0..ds.n() {
        for (j, &m) in means.iter().enumerate() {
            if !ds.is_observed(i, j) {
                out.set(i, j, m);
            }
        }
    }
    out
}
