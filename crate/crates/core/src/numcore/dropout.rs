use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and the per-unit scale mask the
/// backward pass multiplies by (0 or `1 / (1 - drop_prob)`).
pub fn dropout<R: Rng>(x: &[f64], drop_prob: f64, mode: Mode, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    assert!((0.0..1.0).contains(&drop_prob), "drop probability must be in [0, 1)");
    if mode == Mode::Eval || drop_prob == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let keep_scale = 1.0 / (1.0 - drop_prob);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.gen::<f64>() < drop_prob { 0.0 } else { keep_scale })
        .collect();
    let out = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
    (out, mask)
}

pub fn dropout_backward(dy: &[f64], mask: &[f64]) -> Vec<f64> {
    dy.iter().zip(mask).map(|(d, m)| d * m).collect()
}
