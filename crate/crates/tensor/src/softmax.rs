use crate::error::{Result, TensorError};

/// Softmax over the unmasked entries mixed with a uniform distribution over
/// the same entries: `(1 - eps) * softmax + eps / |valid|`.
///
/// Masked entries are exactly zero. Returns the mixture and the plain softmax
/// (also zero on masked entries).
pub fn masked_bounded_softmax_parts(
    logits: &[f64],
    mask: &[bool],
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if logits.len() != mask.len() {
        return Err(TensorError::Shape(format!(
            "{} logits but {} mask entries",
            logits.len(),
            mask.len()
        )));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(TensorError::Contract(format!("epsilon {eps} outside [0, 1]")));
    }
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(TensorError::Contract("every action is masked".into()));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut soft: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = soft.iter().sum();
    soft.iter_mut().for_each(|s| *s /= z);
    let floor = eps / valid as f64;
    let probs = soft
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (1.0 - eps) * s + floor } else { 0.0 })
        .collect();
    Ok((probs, soft))
}

/// See [`masked_bounded_softmax_parts`].
pub fn masked_bounded_softmax(logits: &[f64], mask: &[bool], eps: f64) -> Result<Vec<f64>> {
    masked_bounded_softmax_parts(logits, mask, eps).map(|(p, _)| p)
}
