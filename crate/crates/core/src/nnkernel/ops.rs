use super::{KernelError, Matrix, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Max-shifted softmax of one vector, in place.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

/// Weighted mean softmax cross-entropy over rows, and its gradient with
/// respect to the logits.
pub fn cross_entropy(logits: &Matrix, targets: &[usize], weights: &[f64]) -> Result<(f64, Matrix)> {
    if targets.len() != logits.rows() || weights.len() != logits.rows() {
        return Err(KernelError::Shape(format!(
            "{} logit rows, {} targets, {} weights",
            logits.rows(),
            targets.len(),
            weights.len()
        )));
    }
    let total_weight = weights.iter().sum::<f64>();
    if total_weight == 0.0 {
        return Err(KernelError::NoWeightedTargets);
    }
    let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (r, (&target, &w)) in targets.iter().zip(weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        if target >= logits.cols() {
            return Err(KernelError::TargetOutOfRange {
                target,
                classes: logits.cols(),
            });
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().fold(0.0, |acc, x| acc + (x - max).exp()).ln();
        loss += w * (log_sum - (row[target] - max));
        let scale = w / total_weight;
        let drow = dlogits.row_mut(r);
        for (d, x) in drow.iter_mut().zip(row) {
            *d = scale * (x - max - log_sum).exp();
        }
        drow[target] -= scale;
    }
    Ok((loss / total_weight, dlogits))
}
