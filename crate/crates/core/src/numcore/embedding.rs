use crate::error::{Error, Result};

use super::Matrix;

/// Row `n` of the result is `table[ids[n]]`.
pub fn embedding_forward(table: &Matrix, ids: &[u32]) -> Result<Matrix> {
    let mut out = Matrix::zeros(ids.len(), table.cols());
    for (n, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= table.rows() {
            return Err(Error::Index(format!(
                "token id {id} outside embedding table of {} rows",
                table.rows()
            )));
        }
        out.row_mut(n).copy_from_slice(table.row(id));
    }
    Ok(out)
}

/// Adds row `n` of `upstream` into row `ids[n]` of `grad_table`.
pub fn embedding_backward(grad_table: &mut Matrix, ids: &[u32], upstream: &Matrix) {
    debug_assert_eq!(upstream.rows(), ids.len());
    for (n, &id) in ids.iter().enumerate() {
        super::matrix::axpy(1.0, upstream.row(n), grad_table.row_mut(id as usize));
    }
}
