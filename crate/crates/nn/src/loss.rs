//! Losses returning the batch-mean value and the gradient w.r.t. the input.

use crate::{NnError, Real, Result, Tensor};

/// Softmax cross-entropy over rows of a `B x C` logit tensor, averaged over
/// the batch.
pub fn softmax_cross_entropy<F: Real>(logits: &Tensor<F>, labels: &[usize]) -> Result<(F, Tensor<F>)> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != labels.len() {
        return Err(NnError::shape("softmax_cross_entropy", &[labels.len(), 0], s));
    }
    let (b, c) = (s[0], s[1]);
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(NnError::shape("softmax_cross_entropy label", &[c], &[bad]));
    }
    let scale = F::one() / F::from_usize(b.max(1)).expect("batch");
    let mut loss = F::zero();
    let mut grad = vec![F::zero(); b * c];
    for (i, (row, g)) in logits.data().chunks_exact(c).zip(grad.chunks_exact_mut(c)).enumerate() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let sum: F = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[labels[i]];
        for (gj, &z) in g.iter_mut().zip(row) {
            *gj = (z - log_z).exp() * scale;
        }
        g[labels[i]] -= scale;
    }
    Ok((loss * scale, Tensor::new(vec![b, c], grad)?))
}

/// Squared error summed over elements and averaged over the batch axis.
pub fn mse<F: Real>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<(F, Tensor<F>)> {
    if pred.shape() != target.shape() {
        return Err(NnError::shape("mse", target.shape(), pred.shape()));
    }
    let scale = F::one() / F::from_usize(pred.batch().max(1)).expect("batch");
    let two = F::one() + F::one();
    let mut loss = F::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            loss += (p - t) * (p - t);
            two * (p - t) * scale
        })
        .collect();
    Ok((loss * scale, Tensor::new(pred.shape().to_vec(), grad)?))
}
