//! Batch losses. Each returns the batch-mean value and its gradient with
//! respect to the prediction matrix.

use super::{Matrix, NumericError};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Matrix,
    /// Entries that hit [`PROB_FLOOR`] where the target put weight.
    pub floored: usize,
}

fn check_pair(pred: &Matrix, target: &Matrix, op: &'static str) -> Result<(), NumericError> {
    pred.check_same_shape(target, op)?;
    if pred.rows() == 0 {
        return Err(NumericError::DimensionMismatch {
            op,
            expected: "at least one row".into(),
            got: "empty batch".into(),
        });
    }
    Ok(())
}

/// `mean_i Σ_k w_ik log p_ik` — the signed log-likelihood a pattern classifier maximizes.
///
/// Probabilities below [`PROB_FLOOR`] are clamped; the gradient uses the clamped
/// value so saturated rows still push back.
pub fn cross_entropy_onehot(probs: &Matrix, onehot: &Matrix) -> Result<LossOutput, NumericError> {
    check_pair(probs, onehot, "cross_entropy_onehot")?;
    let n = probs.rows() as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    let mut value = 0.0;
    let mut floored = 0;
    for (i, (&p, &w)) in probs.data().iter().zip(onehot.data()).enumerate() {
        if w == 0.0 {
            continue;
        }
        if p < PROB_FLOOR {
            floored += 1;
        }
        let p = p.max(PROB_FLOOR);
        value += w * p.ln();
        grad.data_mut()[i] = w / p / n;
    }
    Ok(LossOutput {
        value: value / n,
        grad,
        floored,
    })
}

/// `mean_i Σ_j [m_ij log p_ij + (1 − m_ij) log(1 − p_ij)]`, the per-coordinate
/// log-likelihood (larger is better for the classifier).
pub fn coordinate_log_likelihood(
    probs: &Matrix,
    mask: &Matrix,
) -> Result<LossOutput, NumericError> {
    check_pair(probs, mask, "coordinate_log_likelihood")?;
    let n = probs.rows() as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    let mut value = 0.0;
    let mut floored = 0;
    for (i, (&p, &m)) in probs.data().iter().zip(mask.data()).enumerate() {
        let (hit, miss) = (p.max(PROB_FLOOR), (1.0 - p).max(PROB_FLOOR));
        if (m > 0.0 && p < PROB_FLOOR) || (m < 1.0 && 1.0 - p < PROB_FLOOR) {
            floored += 1;
        }
        value += m * hit.ln() + (1.0 - m) * miss.ln();
        grad.data_mut()[i] = (m / hit - (1.0 - m) / miss) / n;
    }
    Ok(LossOutput {
        value: value / n,
        grad,
        floored,
    })
}

/// Binary cross-entropy `mean_i Σ_j −y log p − (1 − y) log(1 − p)`.
pub fn binary_cross_entropy(pred: &Matrix, label: &Matrix) -> Result<LossOutput, NumericError> {
    let ll = coordinate_log_likelihood(pred, label)?;
    Ok(LossOutput {
        value: -ll.value,
        grad: ll.grad.scale(-1.0),
        floored: ll.floored,
    })
}

/// `mean_i ‖p_i − t_i‖²`.
pub fn squared(pred: &Matrix, target: &Matrix) -> Result<LossOutput, NumericError> {
    check_pair(pred, target, "squared")?;
    let n = pred.rows() as f64;
    let mut value = 0.0;
    let grad = pred.zip_map(target, |p, t| 2.0 * (p - t) / n)?;
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        value += (p - t) * (p - t);
    }
    Ok(LossOutput {
        value: value / n,
        grad,
        floored: 0,
    })
}

/// `α · mean_i Σ_j m_ij (x̃_ij − x̄_ij)²`, gradient taken with respect to `generated`.
///
/// Cells with `m = 0` contribute nothing, whatever `observed` holds there.
pub fn masked_reconstruction(
    mask: &Matrix,
    observed: &Matrix,
    generated: &Matrix,
    alpha: f64,
) -> Result<LossOutput, NumericError> {
    check_pair(generated, observed, "masked_reconstruction")?;
    check_pair(generated, mask, "masked_reconstruction")?;
    let n = generated.rows() as f64;
    let mut grad = Matrix::zeros(generated.rows(), generated.cols());
    let mut value = 0.0;
    for i in 0..generated.data().len() {
        let m = mask.data()[i];
        if m == 0.0 {
            continue;
        }
        let diff = generated.data()[i] - observed.data()[i];
        value += m * diff * diff;
        grad.data_mut()[i] = alpha * 2.0 * m * diff / n;
    }
    Ok(LossOutput {
        value: alpha * value / n,
        grad,
        floored: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cross_entropy_cases() {
        let onehot = m(&[vec![0.0, 1.0, 0.0, 0.0]]);
        assert_eq!(cross_entropy_onehot(&onehot, &onehot).unwrap().value, 0.0);
        let uniform = Matrix::filled(1, 4, 0.25);
        let v = cross_entropy_onehot(&uniform, &onehot).unwrap().value;
        assert!((v - (-1.386_294_361_119_890_6)).abs() < 1e-12);
        // rows: log 0.7 = −0.35667494393873245, log 0.2 = −1.6094379124341003
        let probs = m(&[vec![0.7, 0.3], vec![0.8, 0.2]]);
        let w = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let v = cross_entropy_onehot(&probs, &w).unwrap().value;
        assert!((v - (-0.983_056_428_186_416_4)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_floor_is_flagged() {
        let probs = m(&[vec![1.0, 0.0]]);
        let w = m(&[vec![0.0, 1.0]]);
        let out = cross_entropy_onehot(&probs, &w).unwrap();
        assert_eq!(out.floored, 1);
        assert!((out.value - PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn binary_cross_entropy_cases() {
        let v = binary_cross_entropy(&m(&[vec![0.5]]), &m(&[vec![1.0]]))
            .unwrap()
            .value;
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        let v = binary_cross_entropy(&m(&[vec![1.0]]), &m(&[vec![1.0]]))
            .unwrap()
            .value;
        assert!(v.abs() < 1e-12);
        let v = binary_cross_entropy(&m(&[vec![0.9]]), &m(&[vec![0.0]]))
            .unwrap()
            .value;
        assert!((v - std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn squared_cases() {
        assert_eq!(
            squared(&m(&[vec![0.3]]), &m(&[vec![0.3]])).unwrap().value,
            0.0
        );
        assert_eq!(
            squared(&m(&[vec![0.0]]), &m(&[vec![1.0]])).unwrap().value,
            1.0
        );
        // rows: (1−0)² + (2−4)² = 5 and (0.5−0)² = 0.25 → mean 2.625
        let v = squared(
            &m(&[vec![1.0, 2.0], vec![0.5, 0.0]]),
            &m(&[vec![0.0, 4.0], vec![0.0, 0.0]]),
        )
        .unwrap()
        .value;
        assert!((v - 2.625).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_masks_missing_cells() {
        let mask = m(&[vec![1.0, 0.0]]);
        let obs = m(&[vec![0.5, 0.0]]);
        let gen = m(&[vec![0.3, 0.9]]);
        let out = masked_reconstruction(&mask, &obs, &gen, 10.0).unwrap();
        assert!((out.value - 0.4).abs() < 1e-12);
        assert_eq!(out.grad.get(0, 1), 0.0);
        let exact = masked_reconstruction(&mask, &m(&[vec![0.3, 5.0]]), &gen, 10.0).unwrap();
        assert_eq!(exact.value, 0.0);
    }

    #[test]
    fn coordinate_likelihood_cases() {
        let mask = m(&[vec![1.0, 0.0, 1.0]]);
        assert!(coordinate_log_likelihood(&mask, &mask).unwrap().value.abs() < 1e-12);
        let half = Matrix::filled(2, 3, 0.5);
        let v = coordinate_log_likelihood(&half, &m(&[vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]))
            .unwrap()
            .value;
        assert!((v - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(squared(&Matrix::zeros(0, 2), &Matrix::zeros(0, 2)).is_err());
    }
}
