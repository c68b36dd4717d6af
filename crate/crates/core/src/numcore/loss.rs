/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax probabilities and the cross-entropy `-ln p[truth]`.
pub fn softmax_xent(logits: &[f64], truth: usize) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (logits[truth] - max);
    (softmax(logits), loss)
}

/// Gradient of the cross-entropy with respect to the logits: `p - onehot`.
pub fn softmax_xent_backward(probs: &[f64], truth: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[truth] -= 1.0;
    g
}

/// `‖y − target‖²`.
pub fn squared_error(y: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), target.len());
    y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Gradient with respect to `y`: `2 (y − target)`.
pub fn squared_error_backward(y: &[f64], target: &[f64]) -> Vec<f64> {
    y.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect()
}

/// `λx · H + λy · SE`, with the SE term dropped for untargeted utterances.
pub fn joint_loss(xent: f64, se: f64, lambda_x: f64, lambda_y: f64, targeted: bool) -> f64 {
    let topic = if targeted { lambda_y * se } else { 0.0 };
    lambda_x * xent + topic
}
