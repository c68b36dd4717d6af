use super::Matrix;

/// `y = W x + b`.
pub fn linear_forward(w: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = w.matvec(x);
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi += bi;
    }
    y
}

/// Accumulates parameter gradients and returns `dx`.
pub fn linear_backward(w: &Matrix, x: &[f64], dy: &[f64], dw: &mut Matrix, db: &mut [f64]) -> Vec<f64> {
    dw.outer_acc(dy, x);
    for (g, d) in db.iter_mut().zip(dy) {
        *g += d;
    }
    let mut dx = vec![0.0; x.len()];
    w.matvec_t_acc(dy, &mut dx);
    dx
}
