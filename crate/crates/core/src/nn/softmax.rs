//! Numerically stable softmax.

use crate::error::{Error, Result};

/// Maps logits to a probability vector via exp(z_k − max z) / Σ exp(z_j − max z).
/// The max shift keeps the exponentials in range for any finite input.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::shape("softmax input must be non-empty"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("softmax input contains non-finite values"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}
