use super::{NnError, Scalar, Tensor};

/// Added inside the logarithm of the cross-entropy.
pub const CE_EPSILON: f64 = 1e-12;

/// Max-shifted softmax of one logit row.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn cross_entropy<S: Scalar>(probs: &[S], label: usize) -> S {
    -(probs[label] + S::from_f64_lossy(CE_EPSILON)).ln()
}

/// Batch result of the fused softmax and cross-entropy.
#[derive(Debug, Clone)]
pub struct LossOutput<S> {
    /// Mean loss over the batch.
    pub loss: S,
    /// Gradient of the mean loss w.r.t. the logits, `(p - onehot) / N`.
    pub grad: Tensor<S>,
    pub probs: Tensor<S>,
    pub correct: usize,
}

/// Index of the largest value; ties go to the lower index.
pub fn argmax<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[usize]) -> Result<LossOutput<S>, NnError> {
    if logits.shape().len() != 2 || logits.batch() != labels.len() || labels.is_empty() {
        return Err(NnError::ShapeMismatch(format!(
            "loss expects [N, classes] logits for {} labels, got {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    let classes = logits.shape()[1];
    let n = S::from_usize(labels.len()).unwrap();
    let mut probs = Vec::with_capacity(logits.len());
    let mut grad = Vec::with_capacity(logits.len());
    let mut total = S::zero();
    let mut correct = 0;
    for (row, &label) in logits.data().chunks_exact(classes).zip(labels) {
        if label >= classes {
            return Err(NnError::ShapeMismatch(format!("label {label} outside {classes} classes")));
        }
        let p = softmax(row);
        total += cross_entropy(&p, label);
        if argmax(row) == label {
            correct += 1;
        }
        grad.extend(p.iter().enumerate().map(|(k, &pk)| (if k == label { pk - S::one() } else { pk }) / n));
        probs.extend(p);
    }
    Ok(LossOutput {
        loss: total / n,
        grad: Tensor::new(logits.shape().to_vec(), grad)?,
        probs: Tensor::new(logits.shape().to_vec(), probs)?,
        correct,
    })
}
