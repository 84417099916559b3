use super::qr::{householder_cpqr, Stop};
use super::{gaussian_block, DenseMatrix};
use crate::error::invalid;
use crate::Result;

/// Sample columns whose norm is at most this fraction of the largest column
/// norm count as numerically zero.
pub const ZERO_COLUMN_THRESHOLD: f64 = 1e-14;

/// Orthonormal basis for the range of a linear map from `k + p` Gaussian
/// samples. Numerically zero directions are dropped, so the result may have
/// fewer than `k + p` columns.
pub fn randomized_range<F>(mut sampler: F, n: usize, k: usize, p: usize, seed: u64) -> Result<DenseMatrix>
where
    F: FnMut(&DenseMatrix) -> Result<DenseMatrix>,
{
    let width = k + p;
    if width == 0 || width > n {
        return Err(invalid(format!("sample width {width} outside 1..={n}")));
    }
    let omega = gaussian_block(n, width, seed);
    let y = sampler(&omega)?;
    if y.ncols() != width {
        return Err(invalid("sampler changed the number of columns"));
    }
    Ok(range_basis(&y))
}

/// Orthonormal basis for the numerical column space of `y`.
pub(crate) fn range_basis(y: &DenseMatrix) -> DenseMatrix {
    if y.is_empty() {
        return DenseMatrix::zeros(y.nrows(), 0);
    }
    let scale = y.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    householder_cpqr(y, Stop::Residual(ZERO_COLUMN_THRESHOLD * scale)).q()
}
