//! Dense kernels: column-pivoted QR, SVD, interpolative decomposition,
//! Gaussian test matrices and the randomized range finder.

mod id;
mod qr;
mod random;
mod range;
mod svd;

use nalgebra::DMatrix;

pub use id::{id_decompose, InterpolativeDecomposition};
pub use qr::{qr, PivotedQr};
pub use random::{gaussian_block, GaussianRng};
pub use range::{randomized_range, ZERO_COLUMN_THRESHOLD};
pub use svd::{svd, Svd};

pub(crate) use id::id_unchecked;
pub(crate) use range::range_basis;
pub(crate) use qr::orthonormalize;
pub(crate) use svd::svd_unchecked;

/// Column-major dense matrix of doubles.
pub type DenseMatrix = DMatrix<f64>;

/// How far a factorization is carried out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorizationMode {
    /// Economy-size factorization, exact to roundoff.
    Full,
    /// Exactly `k` terms.
    FixedRank(usize),
    /// Accuracy-driven truncation. For `svd` this is an absolute threshold
    /// on the singular values; for `qr` and `id` the residual is bounded by
    /// `eps` times the largest column norm of the input.
    Tolerance(f64),
    /// `svd` only: keep singular values above `eps * sigma_1`.
    /// Behaves like `Tolerance` for `qr` and `id`.
    RelativeTolerance(f64),
}

impl FactorizationMode {
    pub(crate) fn validate(&self, max_rank: usize) -> crate::Result<()> {
        match *self {
            FactorizationMode::Full => Ok(()),
            FactorizationMode::FixedRank(k) if k >= 1 && k <= max_rank => Ok(()),
            FactorizationMode::FixedRank(k) => Err(crate::error::invalid(format!(
                "rank {k} outside 1..={max_rank}"
            ))),
            FactorizationMode::Tolerance(eps) | FactorizationMode::RelativeTolerance(eps) => {
                if eps > 0.0 && eps < 1.0 {
                    Ok(())
                } else {
                    Err(crate::error::invalid(format!("tolerance {eps} outside (0, 1)")))
                }
            }
        }
    }
}

pub(crate) fn ensure_nonempty(a: &DenseMatrix) -> crate::Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        Err(crate::error::invalid("empty matrix"))
    } else {
        Ok(())
    }
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd_unchecked(a, FactorizationMode::Full)
        .map(|s| s.s.first().copied().unwrap_or(0.0))
        .unwrap_or(f64::NAN)
}

/// `max |Q^T Q - I|` entrywise; zero for an empty basis.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    if q.ncols() == 0 {
        return 0.0;
    }
    let g = q.tr_mul(q);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Copies the listed rows of `a` into a new matrix.
pub fn select_rows(a: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// `a * diag(d)`.
pub fn scale_columns(a: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let mut out = a.clone();
    for (j, &dj) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(dj);
    }
    out
}

/// `[a, b]` for matrices with equal row counts.
pub fn hstack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DenseMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `[a; b]` for matrices with equal column counts.
pub fn vstack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = DenseMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}
