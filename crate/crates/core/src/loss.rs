//! Binary cross-entropy with logits, in the overflow-safe log-sum-exp form.

use crate::error::{Error, Result};

/// Numerically stable sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_lengths(logits: &[f64], labels: &[f64]) -> Result<()> {
    if logits.len() != labels.len() {
        return Err(Error::dim("logits vs labels", labels.len(), logits.len()));
    }
    Ok(())
}

/// Mean over the batch of `-y log sigma(z) - (1-y) log(1 - sigma(z))`,
/// computed as `max(z,0) - z*y + log(1 + exp(-|z|))` so it stays finite for
/// any finite logit.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(logits, labels)?;
    let b = logits.len();
    if b == 0 {
        return Err(Error::dim("batch size", 1, 0));
    }
    let mut total = 0.0;
    for (&z, &y) in logits.iter().zip(labels) {
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    Ok(total / b as f64)
}

/// Per-row derivative of [`bce_with_logits`] with respect to each logit:
/// `(sigma(z_i) - y_i) / b`.
pub fn bce_gradient(logits: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check_lengths(logits, labels)?;
    let b = logits.len() as f64;
    Ok(logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| (sigmoid(z) - y) / b)
        .collect())
}
