use super::{shape_err, NnError, Real, Tensor3};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

fn check_labels(labels: &[u8]) -> Result<(), NnError> {
    match labels.iter().position(|&y| y > 1) {
        Some(index) => Err(NnError::Label {
            index,
            value: labels[index],
        }),
        None => Ok(()),
    }
}

/// Binary cross-entropy summed over each sample's bits and averaged over
/// the `batch` samples that `probs` and `labels` hold back to back.
pub fn bce_loss<T: Real>(probs: &[T], labels: &[u8], batch: usize) -> Result<f64, NnError> {
    if probs.len() != labels.len() {
        return Err(shape_err("bce labels", probs.len(), labels.len()));
    }
    check_labels(labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.widen().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / batch.max(1) as f64)
}

/// Sigmoid + BCE fused on logits. Returns the batch-mean loss and its
/// gradient with respect to the logits, `(σ(z) - y) / batch`.
pub fn bce_with_logits<T: Real>(
    logits: &Tensor3<T>,
    labels: &[u8],
) -> Result<(f64, Tensor3<T>), NnError> {
    if logits.data().len() != labels.len() {
        return Err(shape_err("bce labels", logits.data().len(), labels.len()));
    }
    check_labels(labels)?;
    let batch = logits.batch().max(1) as f64;
    let mut loss = 0.0;
    let grad: Vec<T> = logits
        .data()
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let z = z.widen();
            let y = y as f64;
            // softplus(z) - y·z
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
            let s = if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            };
            T::cast((s - y) / batch)
        })
        .collect();
    Ok((loss / batch, Tensor3::from_vec(logits.shape(), grad)?))
}

/// Mean squared error over all elements and its gradient.
pub fn mse_loss<T: Real>(pred: &Tensor3<T>, target: &[f64]) -> Result<(f64, Tensor3<T>), NnError> {
    if pred.data().len() != target.len() {
        return Err(shape_err("mse target", pred.data().len(), target.len()));
    }
    let n = target.len().max(1) as f64;
    let mut loss = 0.0;
    let grad: Vec<T> = pred
        .data()
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p.widen() - t;
            loss += d * d;
            T::cast(2.0 * d / n)
        })
        .collect();
    Ok((loss / n, Tensor3::from_vec(pred.shape(), grad)?))
}
