use crate::error::{Error, Result};

use super::Matrix;

/// What the backward pass needs from a convolution + global max-pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCache {
    /// Input rows after zero-padding up to the filter height.
    pub input: Matrix,
    /// Winning window start per filter; ties go to the lowest position.
    pub argmax: Vec<usize>,
    /// Pre-activation at the winning window per filter.
    pub pre_activation: Vec<f64>,
    /// Row count before padding.
    pub original_rows: usize,
}

/// ReLU convolution over the rows of `u` followed by global max-pooling.
///
/// `filters` has one row per filter holding its `height × u.cols()` weights
/// row-major. Inputs shorter than `height` are zero-padded.
pub fn conv_maxpool_forward(
    u: &Matrix,
    filters: &Matrix,
    bias: &[f64],
    height: usize,
) -> Result<(Vec<f64>, ConvCache)> {
    let n_filters = filters.rows();
    let width = u.cols();
    if n_filters == 0 {
        return Err(Error::Config("convolution needs at least one filter".into()));
    }
    if height == 0 || filters.cols() != height * width || bias.len() != n_filters {
        return Err(Error::Dimension(format!(
            "filters {}x{} / bias {} do not fit height {height} over width {width}",
            filters.rows(),
            filters.cols(),
            bias.len()
        )));
    }
    let original_rows = u.rows();
    let input = if original_rows < height {
        let mut padded = Matrix::zeros(height, width);
        padded.as_mut_slice()[..u.as_slice().len()].copy_from_slice(u.as_slice());
        padded
    } else {
        u.clone()
    };
    let positions = input.rows() - height + 1;
    let mut pooled = vec![0.0; n_filters];
    let mut argmax = vec![0; n_filters];
    let mut pre_activation = vec![f64::NEG_INFINITY; n_filters];
    for f in 0..n_filters {
        let w = filters.row(f);
        let mut best = f64::NEG_INFINITY;
        for i in 0..positions {
            let window = &input.as_slice()[i * width..(i + height) * width];
            let z = super::matrix::dot(w, window) + bias[f];
            let v = z.max(0.0);
            if v > best {
                best = v;
                argmax[f] = i;
                pre_activation[f] = z;
            }
        }
        pooled[f] = best;
    }
    Ok((
        pooled,
        ConvCache {
            input,
            argmax,
            pre_activation,
            original_rows,
        },
    ))
}

/// Routes `d_pooled` through each filter's winning window. Returns the
/// gradient with respect to the unpadded input rows.
pub fn conv_maxpool_backward(
    filters: &Matrix,
    cache: &ConvCache,
    d_pooled: &[f64],
    d_filters: &mut Matrix,
    d_bias: &mut [f64],
) -> Matrix {
    let width = cache.input.cols();
    let height = filters.cols() / width;
    let mut d_input = Matrix::zeros(cache.input.rows(), width);
    for (f, &g) in d_pooled.iter().enumerate() {
        // ReLU subgradient at zero is zero.
        if g == 0.0 || cache.pre_activation[f] <= 0.0 {
            continue;
        }
        let start = cache.argmax[f] * width;
        let window = &cache.input.as_slice()[start..start + height * width];
        super::matrix::axpy(g, window, d_filters.row_mut(f));
        d_bias[f] += g;
        super::matrix::axpy(g, filters.row(f), &mut d_input.as_mut_slice()[start..start + height * width]);
    }
    if cache.original_rows < cache.input.rows() {
        let keep = cache.original_rows * width;
        Matrix::from_vec(cache.original_rows, width, d_input.as_slice()[..keep].to_vec())
            .expect("prefix has matching size")
    } else {
        d_input
    }
}
