use crate::error::{Error, Result};

use super::{sigmoid, Matrix};

/// Weights of one LSTM layer. Gate blocks are stacked `[input; forget;
/// candidate; output]`, each `hidden` rows tall.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    pub w_x: &'a Matrix,
    pub w_h: &'a Matrix,
    pub bias: &'a [f64],
}

impl LstmParams<'_> {
    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    fn check(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        let hidden = self.hidden();
        let ok = self.w_h.rows() == 4 * hidden
            && self.w_x.rows() == 4 * hidden
            && self.bias.len() == 4 * hidden
            && self.w_x.cols() == x.len()
            && h_prev.len() == hidden
            && c_prev.len() == hidden;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "lstm step: w_x {:?}, w_h {:?}, bias {}, x {}, h {}, c {}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.bias.len(),
                x.len(),
                h_prev.len(),
                c_prev.len()
            )))
        }
    }
}

pub struct LstmGrads<'a> {
    pub w_x: &'a mut Matrix,
    pub w_h: &'a mut Matrix,
    pub bias: &'a mut [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// One LSTM step; returns `(h, c, cache)`.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: LstmParams<'_>,
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    p.check(x, h_prev, c_prev)?;
    let hidden = p.hidden();
    let mut z = p.w_x.matvec(x);
    let zh = p.w_h.matvec(h_prev);
    for ((zi, zhi), b) in z.iter_mut().zip(&zh).zip(p.bias) {
        *zi += zhi + b;
    }
    let input_gate: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let forget_gate: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let candidate: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|v| v.tanh()).collect();
    let output_gate: Vec<f64> = z[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..hidden)
        .map(|j| forget_gate[j] * c_prev[j] + input_gate[j] * candidate[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|j| output_gate[j] * tanh_c[j]).collect();
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        input_gate,
        forget_gate,
        candidate,
        output_gate,
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backpropagates `dh`/`dc` through one step, accumulating into `grads`.
/// Returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_step_backward(
    p: LstmParams<'_>,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
    grads: LstmGrads<'_>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hidden = p.hidden();
    let mut dz = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for j in 0..hidden {
        let (i, f, g, o) = (
            cache.input_gate[j],
            cache.forget_gate[j],
            cache.candidate[j],
            cache.output_gate[j],
        );
        let tc = cache.tanh_c[j];
        let dc_total = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dc_total * g * i * (1.0 - i);
        dz[hidden + j] = dc_total * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * hidden + j] = dc_total * i * (1.0 - g * g);
        dz[3 * hidden + j] = dh[j] * tc * o * (1.0 - o);
        dc_prev[j] = dc_total * f;
    }
    grads.w_x.outer_acc(&dz, &cache.x);
    grads.w_h.outer_acc(&dz, &cache.h_prev);
    for (b, d) in grads.bias.iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = vec![0.0; cache.x.len()];
    p.w_x.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hidden];
    p.w_h.matvec_t_acc(&dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state() {
        let (w_x, w_h, b) = (Matrix::zeros(8, 3), Matrix::zeros(8, 2), vec![0.0; 8]);
        let p = LstmParams { w_x: &w_x, w_h: &w_h, bias: &b };
        let (h, c, _) = lstm_step(&[0.3, -1.0, 2.0], &[0.0; 2], &[0.0; 2], p).unwrap();
        assert_eq!(h, [0.0, 0.0]);
        assert_eq!(c, [0.0, 0.0]);

        let (_, c, _) = lstm_step(&[0.0; 3], &[0.0; 2], &[0.8, -0.4], p).unwrap();
        assert_eq!(c, [0.4, -0.2]);
    }

    #[test]
    fn shape_mismatch() {
        let (w_x, w_h, b) = (Matrix::zeros(8, 3), Matrix::zeros(8, 2), vec![0.0; 8]);
        let p = LstmParams { w_x: &w_x, w_h: &w_h, bias: &b };
        assert!(matches!(lstm_step(&[0.0; 2], &[0.0; 2], &[0.0; 2], p), Err(Error::Dimension(_))));
    }

    /// Unrolls `xs` from zero state and scores Σ_t coef · h_t.
    fn unrolled_loss(w_x: &Matrix, w_h: &Matrix, b: &[f64], xs: &[Vec<f64>], coef: &[f64]) -> f64 {
        let p = LstmParams { w_x, w_h, bias: b };
        let hidden = w_h.cols();
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        let mut total = 0.0;
        for x in xs {
            let (h2, c2, _) = lstm_step(x, &h, &c, p).unwrap();
            total += h2.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
            h = h2;
            c = c2;
        }
        total
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (input, hidden, steps) = (3, 4, 4);
        let w_x = Matrix::uniform(4 * hidden, input, 0.6, &mut rng);
        let w_h = Matrix::uniform(4 * hidden, hidden, 0.6, &mut rng);
        let b: Vec<f64> = Matrix::uniform(1, 4 * hidden, 0.3, &mut rng).into_vec();
        let xs: Vec<Vec<f64>> = (0..steps).map(|_| Matrix::uniform(1, input, 1.0, &mut rng).into_vec()).collect();
        let coef: Vec<f64> = Matrix::uniform(1, hidden, 1.0, &mut rng).into_vec();

        let p = LstmParams { w_x: &w_x, w_h: &w_h, bias: &b };
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        let mut caches = Vec::new();
        for x in &xs {
            let (h2, c2, cache) = lstm_step(x, &h, &c, p).unwrap();
            caches.push(cache);
            h = h2;
            c = c2;
        }
        let mut gw_x = Matrix::zeros(4 * hidden, input);
        let mut gw_h = Matrix::zeros(4 * hidden, hidden);
        let mut gb = vec![0.0; 4 * hidden];
        let mut dxs = vec![Vec::new(); steps];
        let (mut dh_next, mut dc_next) = (vec![0.0; hidden], vec![0.0; hidden]);
        for t in (0..steps).rev() {
            let dh: Vec<f64> = coef.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = lstm_step_backward(
                p,
                &caches[t],
                &dh,
                &dc_next,
                LstmGrads { w_x: &mut gw_x, w_h: &mut gw_h, bias: &mut gb },
            );
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        let r = grad_check(|q| unrolled_loss(&Matrix::from_vec(4 * hidden, input, q.to_vec()).unwrap(), &w_h, &b, &xs, &coef), w_x.as_slice(), gw_x.as_slice(), 1e-5);
        assert!(r.max_rel_error <= 1e-4, "w_x {r:?}");
        let r = grad_check(|q| unrolled_loss(&w_x, &Matrix::from_vec(4 * hidden, hidden, q.to_vec()).unwrap(), &b, &xs, &coef), w_h.as_slice(), gw_h.as_slice(), 1e-5);
        assert!(r.max_rel_error <= 1e-4, "w_h {r:?}");
        let r = grad_check(|q| unrolled_loss(&w_x, &w_h, q, &xs, &coef), &b, &gb, 1e-5);
        assert!(r.max_rel_error <= 1e-4, "bias {r:?}");
        let flat_x: Vec<f64> = xs.concat();
        let flat_dx: Vec<f64> = dxs.concat();
        let r = grad_check(
            |q| {
                let xs: Vec<Vec<f64>> = q.chunks(input).map(<[f64]>::to_vec).collect();
                unrolled_loss(&w_x, &w_h, &b, &xs, &coef)
            },
            &flat_x,
            &flat_dx,
            1e-5,
        );
        assert!(r.max_rel_error <= 1e-4, "x {r:?}");
    }
}
