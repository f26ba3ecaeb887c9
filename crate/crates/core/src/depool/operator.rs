use nalgebra::DMatrix;

use crate::depool::bank::KernelBank;
use crate::depool::transform::depool_forward;
use crate::error::{Error, Result};
use crate::tensor::Field;

/// Largest side accepted by [`build_operator_matrix`].
pub const OPERATOR_MAX_SIDE: usize = 32;

/// Dense matrix of [`depool_forward`] for an `h x w` field.
///
/// Column `k` is the analysis of the `k`-th row-major standard basis field;
/// rows follow [`SubbandSet::flatten`](super::SubbandSet::flatten) order
/// (MS, VD, HD, DD, each row-major), giving `h * w` rows.
pub fn build_operator_matrix(h: usize, w: usize, bank: &KernelBank) -> Result<DMatrix<f64>> {
    if h > OPERATOR_MAX_SIDE || w > OPERATOR_MAX_SIDE {
        return Err(Error::Capacity(format!("dense operator limited to {OPERATOR_MAX_SIDE}x{OPERATOR_MAX_SIDE}, got {h}x{w}")));
    }
    let n = h * w;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut basis = Field::zeros(h.max(1), w.max(1));
    for k in 0..n {
        basis.data_mut()[k] = 1.0;
        let col = depool_forward(&basis, bank)?.flatten();
        a.column_mut(k).copy_from_slice(&col);
        basis.data_mut()[k] = 0.0;
    }
    Ok(a)
}
