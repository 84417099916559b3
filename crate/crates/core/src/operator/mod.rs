//! Black-box operator contract and the test operators the compressors are
//! exercised on.

mod curve;
mod frontal;
pub mod planted;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::compressed::Compressed;
use crate::error::{check_dim, invalid};
use crate::linalg::DenseMatrix;
use crate::Result;

pub use curve::{double_layer_oracle, log_kernel_matrix, log_kernel_oracle, ClosedCurve, PointSet2D, StarCurve};
pub use frontal::{schur_frontal_oracle, FrontalOracle};

/// Products with an `N x N` operator and its adjoint, one block of columns
/// at a time.
pub trait LinearOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl<T: LinearOracle + ?Sized> LinearOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply_adjoint(x)
    }
}

impl<T: LinearOracle + ?Sized> LinearOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply_adjoint(x)
    }
}

impl<T: LinearOracle + ?Sized> LinearOracle for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).apply_adjoint(x)
    }
}

pub(crate) fn check_input(oracle: &(impl LinearOracle + ?Sized), x: &DenseMatrix) -> Result<()> {
    check_dim(oracle.dim(), x.nrows())
}

/// Tallies the columns sent to `apply` / `apply_adjoint` and the wall time
/// spent inside the wrapped oracle.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    matvecs: AtomicU64,
    adjoints: AtomicU64,
    nanos: AtomicU64,
}

impl<O: LinearOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            matvecs: AtomicU64::new(0),
            adjoints: AtomicU64::new(0),
            nanos: AtomicU64::new(0),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }

    pub fn matvec_count(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn adjoint_count(&self) -> u64 {
        self.adjoints.load(Ordering::Relaxed)
    }

    /// Time spent inside the wrapped oracle since construction or the last reset.
    pub fn oracle_time(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::Relaxed))
    }

    pub fn reset(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
        self.adjoints.store(0, Ordering::Relaxed);
        self.nanos.store(0, Ordering::Relaxed);
    }

    fn timed(&self, f: impl FnOnce() -> Result<DenseMatrix>) -> Result<DenseMatrix> {
        let start = Instant::now();
        let out = f();
        let spent = start.elapsed().as_nanos() as u64;
        self.nanos.fetch_add(spent, Ordering::Relaxed);
        out
    }
}

impl<O: LinearOracle> LinearOracle for CountingOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.matvecs.fetch_add(x.ncols() as u64, Ordering::Relaxed);
        self.timed(|| self.inner.apply(x))
    }

    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.adjoints.fetch_add(x.ncols() as u64, Ordering::Relaxed);
        self.timed(|| self.inner.apply_adjoint(x))
    }
}

/// Column block width for the parallel dense products. Fixed so that results
/// do not depend on the thread count.
const DENSE_CHUNK: usize = 16;

/// Explicit square matrix.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    a: DenseMatrix,
}

pub fn dense_oracle(a: DenseMatrix) -> Result<DenseOracle> {
    if a.nrows() != a.ncols() {
        return Err(invalid(format!("operator must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Err(invalid("operator must be nonempty"));
    }
    Ok(DenseOracle { a })
}

impl DenseOracle {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.a
    }

    fn blocked(&self, x: &DenseMatrix, f: impl Fn(&DenseMatrix) -> DenseMatrix + Sync) -> DenseMatrix {
        let n = self.a.nrows();
        let s = x.ncols();
        if s <= DENSE_CHUNK {
            return f(x);
        }
        let starts: Vec<usize> = (0..s).step_by(DENSE_CHUNK).collect();
        let parts: Vec<DenseMatrix> = starts
            .par_iter()
            .map(|&c| f(&x.columns(c, DENSE_CHUNK.min(s - c)).into_owned()))
            .collect();
        let mut out = DenseMatrix::zeros(n, s);
        for (&c, part) in starts.iter().zip(&parts) {
            out.columns_mut(c, part.ncols()).copy_from(part);
        }
        out
    }
}

impl LinearOracle for DenseOracle {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self, x)?;
        Ok(self.blocked(x, |blk| &self.a * blk))
    }

    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self, x)?;
        // row-vector form keeps the product on the blocked gemm path
        Ok(self.blocked(x, |blk| (blk.transpose() * &self.a).transpose()))
    }
}

/// `left * right`.
#[derive(Debug, Clone)]
pub struct ProductOracle<L, R> {
    left: L,
    right: R,
}

pub fn product_oracle<L: LinearOracle, R: LinearOracle>(left: L, right: R) -> Result<ProductOracle<L, R>> {
    check_dim(left.dim(), right.dim())?;
    Ok(ProductOracle { left, right })
}

impl<L: LinearOracle, R: LinearOracle> LinearOracle for ProductOracle<L, R> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.left.apply(&self.right.apply(x)?)
    }

    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.right.apply_adjoint(&self.left.apply_adjoint(x)?)
    }
}

/// Identity map of dimension `n`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOracle(pub usize);

impl LinearOracle for IdentityOracle {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self, x)?;
        Ok(x.clone())
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}

/// Zero map of dimension `n`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOracle(pub usize);

impl LinearOracle for ZeroOracle {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self, x)?;
        Ok(DenseMatrix::zeros(x.nrows(), x.ncols()))
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}

/// Fast apply of a compressed matrix behind the oracle interface.
#[derive(Debug, Clone)]
pub struct CompressedOracle {
    inner: Compressed,
}

pub fn compressed_oracle(matrix: impl Into<Compressed>) -> CompressedOracle {
    CompressedOracle { inner: matrix.into() }
}

impl CompressedOracle {
    pub fn matrix(&self) -> &Compressed {
        &self.inner
    }
}

impl LinearOracle for CompressedOracle {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.inner.apply(x)
    }
    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.inner.apply_adjoint(x)
    }
}

/// Dense matrix of an operator, assembled one column block at a time.
pub fn assemble(oracle: &(impl LinearOracle + ?Sized)) -> Result<DenseMatrix> {
    oracle.apply(&DenseMatrix::identity(oracle.dim(), oracle.dim()))
}
