use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

/// Mean squared error over every element, with its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!(
            "mse: prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// Softmax cross-entropy over class logits, mean over the batch, with its
/// gradient w.r.t. the logits.
pub fn cross_entropy_loss(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (batch, classes) = logits.dim();
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "cross_entropy: {batch} rows vs {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut grad = Array2::zeros((batch, classes));
    let mut loss = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss -= (exps[labels[i]] / sum).ln();
        for (j, &e) in exps.iter().enumerate() {
            let p = e / sum;
            let onehot = if j == labels[i] { 1.0 } else { 0.0 };
            grad[[i, j]] = (p - onehot) / batch as f64;
        }
    }
    Ok((loss / batch as f64, grad))
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut correct = 0usize;
    for (row, &label) in logits.rows().into_iter().zip(labels) {
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        correct += usize::from(best == label);
    }
    correct as f64 / labels.len().max(1) as f64
}
