/// Maximizes `Σ c_k log d_k` over the probability simplex numerically.
///
/// Works in logit coordinates `d = softmax(θ)` with `θ_K = 0`, where the
/// objective is concave, using damped Newton steps. Zero weights drive their
/// coordinate toward 0 geometrically. Returns `None` when every weight is zero.
pub fn maximize_on_simplex(c: &[f64]) -> Option<Vec<f64>> {
    let k = c.len();
    let total: f64 = c.iter().sum();
    if k == 0 || total <= 0.0 {
        return None;
    }
    if k == 1 {
        return Some(vec![1.0]);
    }
    let r = k - 1;
    let mut theta = vec![0.0; r];
    let value = |theta: &[f64]| {
        let d = softmax_reduced(theta);
        c.iter()
            .zip(&d)
            .filter(|(&ci, _)| ci > 0.0)
            .map(|(&ci, &di)| ci * di.ln())
            .sum::<f64>()
    };
    for _ in 0..500 {
        let d = softmax_reduced(&theta);
        // Gradient and Hessian in the first K−1 logits.
        let grad: Vec<f64> = (0..r).map(|i| c[i] - total * d[i]).collect();
        if grad.iter().all(|g| g.abs() < 1e-15 * total.max(1.0)) {
            break;
        }
        let mut hess = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..r {
                hess[i][j] = total * (d[i] * d[j] - if i == j { d[i] } else { 0.0 });
            }
        }
        let step = match solve(hess, grad.iter().map(|g| -g).collect()) {
            Some(s) => s,
            None => grad.clone(),
        };
        let before = value(&theta);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if value(&trial) >= before || t < 1e-12 {
                theta = trial;
                break;
            }
            t *= 0.5;
        }
    }
    Some(softmax_reduced(&theta))
}

fn softmax_reduced(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(0.0, f64::max);
    let mut e: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    e.push((-max).exp());
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_normalized_weights() {
        let d = maximize_on_simplex(&[1.0, 3.0, 4.0]).unwrap();
        for (got, want) in d.iter().zip([0.125, 0.375, 0.5]) {
            assert!((got - want).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn zero_weight_goes_to_zero() {
        let d = maximize_on_simplex(&[0.0, 2.0, 2.0]).unwrap();
        assert!(d[0] < 1e-12);
        assert!((d[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(maximize_on_simplex(&[0.7]), Some(vec![1.0]));
        assert_eq!(maximize_on_simplex(&[0.0, 0.0]), None);
    }

    #[test]
    fn linear_solve() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
