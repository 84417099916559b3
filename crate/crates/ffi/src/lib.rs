//! C interface to the compression toolkit.
//!
//! Every entry point returns an [`HsStatus`]. On failure the message of the
//! most recent error on the calling thread is available through
//! [`hs_last_error`]. Matrices cross the boundary as column-major `double`
//! arrays; handles are opaque and must be released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicI32, Ordering};

use hsketch::linalg::DenseMatrix;
use hsketch::operator::{dense_oracle, LinearOracle};
use hsketch::tree::IndexTree;
use hsketch::validate::validate;
use hsketch::{compress, io, CompressParams, Compressed, Error, Format};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    LevelNotBuilt = 3,
    Factorization = 4,
    Io = 5,
    Format = 6,
    NullPointer = 7,
    Callback = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsFormat {
    Hodlr = 1,
    Hbs = 2,
    HbsId = 3,
}

impl From<HsFormat> for Format {
    fn from(f: HsFormat) -> Self {
        match f {
            HsFormat::Hodlr => Format::Hodlr,
            HsFormat::Hbs => Format::Hbs,
            HsFormat::HbsId => Format::HbsId,
        }
    }
}

impl TryFrom<u32> for HsFormat {
    type Error = Error;

    fn try_from(v: u32) -> hsketch::Result<Self> {
        match v {
            1 => Ok(HsFormat::Hodlr),
            2 => Ok(HsFormat::Hbs),
            3 => Ok(HsFormat::HbsId),
            _ => Err(Error::InvalidArgument(format!("unknown format code {v}"))),
        }
    }
}

impl From<Format> for HsFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Hodlr => HsFormat::Hodlr,
            Format::Hbs => HsFormat::Hbs,
            Format::HbsId => HsFormat::HbsId,
        }
    }
}

/// Computes `y = A x` (or `A^* x`) for an `n x cols` column-major block.
/// Returns 0 on success; any other value aborts the calling operation with
/// `HS_STATUS_CALLBACK`.
pub type HsApplyFn =
    Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, n: usize, cols: usize, y: *mut f64) -> c_int>;

/// Operator sampled by the compressors.
pub struct HsOracle {
    inner: OracleKind,
}

enum OracleKind {
    Dense(hsketch::operator::DenseOracle),
    Callback(CallbackOracle),
}

struct CallbackOracle {
    n: usize,
    apply: unsafe extern "C" fn(*mut c_void, *const f64, usize, usize, *mut f64) -> c_int,
    adjoint: unsafe extern "C" fn(*mut c_void, *const f64, usize, usize, *mut f64) -> c_int,
    user_data: *mut c_void,
    failed: AtomicI32,
}

// The caller promises the callbacks and user data may be used from any thread.
unsafe impl Send for CallbackOracle {}
unsafe impl Sync for CallbackOracle {}

impl CallbackOracle {
    fn call(
        &self,
        f: unsafe extern "C" fn(*mut c_void, *const f64, usize, usize, *mut f64) -> c_int,
        x: &DenseMatrix,
    ) -> hsketch::Result<DenseMatrix> {
        if x.nrows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.nrows() });
        }
        let mut y = DenseMatrix::zeros(self.n, x.ncols());
        if x.ncols() == 0 {
            return Ok(y);
        }
        let rc = unsafe { f(self.user_data, x.as_ptr(), self.n, x.ncols(), y.as_mut_ptr()) };
        if rc != 0 {
            self.failed.store(rc, Ordering::Relaxed);
            return Err(Error::InvalidArgument(format!("oracle callback returned {rc}")));
        }
        Ok(y)
    }
}

impl LinearOracle for HsOracle {
    fn dim(&self) -> usize {
        match &self.inner {
            OracleKind::Dense(d) => d.dim(),
            OracleKind::Callback(c) => c.n,
        }
    }

    fn apply(&self, x: &DenseMatrix) -> hsketch::Result<DenseMatrix> {
        match &self.inner {
            OracleKind::Dense(d) => d.apply(x),
            OracleKind::Callback(c) => c.call(c.apply, x),
        }
    }

    fn apply_adjoint(&self, x: &DenseMatrix) -> hsketch::Result<DenseMatrix> {
        match &self.inner {
            OracleKind::Dense(d) => d.apply_adjoint(x),
            OracleKind::Callback(c) => c.call(c.adjoint, x),
        }
    }
}

impl HsOracle {
    fn take_callback_failure(&self) -> bool {
        match &self.inner {
            OracleKind::Callback(c) => c.failed.swap(0, Ordering::Relaxed) != 0,
            OracleKind::Dense(_) => false,
        }
    }
}

/// A compressed matrix in one of the three formats.
pub struct HsMatrix {
    inner: Compressed,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::InvalidArgument(_) => HsStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => HsStatus::DimensionMismatch,
        Error::LevelNotBuilt { .. } => HsStatus::LevelNotBuilt,
        Error::Factorization(_) => HsStatus::Factorization,
        Error::Io(_) => HsStatus::Io,
        Error::Format(_) => HsStatus::Format,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
    Callback(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Callback(e))) => {
            set_error(e.to_string());
            HsStatus::Callback
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument("path is not valid UTF-8".into())))?;
    Ok(Path::new(s))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Wraps a copy of the column-major `n x n` array `data`.
///
/// # Safety
/// `data` must point to `n * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_oracle_dense(n: usize, data: *const f64, out: *mut *mut HsOracle) -> HsStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| Error::InvalidArgument("n * n overflows".into()))?;
        let a = DenseMatrix::from_column_slice(n, n, slice(data, len, "data")?);
        store(out, HsOracle { inner: OracleKind::Dense(dense_oracle(a)?) })
    })
}

/// Wraps user callbacks for `A` and `A^*`. Both may be invoked from any
/// thread while the oracle is alive.
///
/// # Safety
/// The callbacks must write `n * cols` doubles to `y` and be safe to call
/// with `user_data` until the oracle is freed.
#[no_mangle]
pub unsafe extern "C" fn hs_oracle_callback(
    n: usize,
    apply: HsApplyFn,
    apply_adjoint: HsApplyFn,
    user_data: *mut c_void,
    out: *mut *mut HsOracle,
) -> HsStatus {
    guard(|| {
        let (Some(apply), Some(adjoint)) = (apply, apply_adjoint) else {
            return Err(Failure::Null("callback"));
        };
        if n == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()).into());
        }
        store(
            out,
            HsOracle {
                inner: OracleKind::Callback(CallbackOracle {
                    n,
                    apply,
                    adjoint,
                    user_data,
                    failed: AtomicI32::new(0),
                }),
            },
        )
    })
}

/// # Safety
/// `oracle` must be null or a handle from an `hs_oracle_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn hs_oracle_free(oracle: *mut HsOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Compresses `oracle` on a tree with leaves of at most `leaf_size` indices.
/// `format` is one of the `HsFormat` values.
///
/// # Safety
/// `oracle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_compress(
    oracle: *const HsOracle,
    leaf_size: usize,
    format: u32,
    sample_width: usize,
    eps: f64,
    seed: u64,
    out: *mut *mut HsMatrix,
) -> HsStatus {
    guard(|| {
        let oracle = non_null(oracle, "oracle")?;
        let format = HsFormat::try_from(format)?;
        let tree = IndexTree::build(oracle.dim(), leaf_size)?;
        let params = CompressParams { sample_width, eps, seed };
        let result = compress(oracle, &tree, format.into(), params);
        let inner = match result {
            Ok(c) => c,
            Err(e) if oracle.take_callback_failure() => return Err(Failure::Callback(e)),
            Err(e) => return Err(e.into()),
        };
        store(out, HsMatrix { inner })
    })
}

/// # Safety
/// `matrix` must be null or a handle from `hs_compress` / `hs_matrix_load`.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_free(matrix: *mut HsMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Side length `N`, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_dim(matrix: *const HsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of tree levels below the root, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_levels(matrix: *const HsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.tree().depth())
}

/// Largest off-diagonal rank, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_max_rank(matrix: *const HsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.max_rank())
}

/// Bytes of stored floating-point data, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_storage_bytes(matrix: *const HsMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.storage_bytes())
}

/// # Safety
/// `matrix` must be a live handle; `format` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_format(matrix: *const HsMatrix, format: *mut HsFormat) -> HsStatus {
    guard(|| {
        let m = non_null(matrix, "matrix")?;
        let out = format.as_mut().ok_or(Failure::Null("format"))?;
        *out = m.inner.format().into();
        Ok(())
    })
}

/// `y = A x`, `A^* x` when `adjoint` is nonzero. `x` and `y` are `N x cols`
/// column-major and must not overlap.
///
/// # Safety
/// `x` must hold and `y` must have room for `N * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_apply(
    matrix: *const HsMatrix,
    x: *const f64,
    cols: usize,
    adjoint: c_int,
    y: *mut f64,
) -> HsStatus {
    apply_with(matrix, x, cols, y, |c, x| if adjoint != 0 { c.apply_adjoint(x) } else { c.apply(x) })
}

/// Applies only the sibling blocks on levels `1..=level`, without the
/// diagonal blocks. Level 0 is the zero map.
///
/// # Safety
/// As for [`hs_matrix_apply`].
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_apply_truncated(
    matrix: *const HsMatrix,
    level: usize,
    x: *const f64,
    cols: usize,
    adjoint: c_int,
    y: *mut f64,
) -> HsStatus {
    apply_with(matrix, x, cols, y, |c, x| c.apply_truncated(level, x, adjoint != 0))
}

unsafe fn apply_with(
    matrix: *const HsMatrix,
    x: *const f64,
    cols: usize,
    y: *mut f64,
    f: impl FnOnce(&Compressed, &DenseMatrix) -> hsketch::Result<DenseMatrix>,
) -> HsStatus {
    guard(|| {
        let m = non_null(matrix, "matrix")?;
        let n = m.inner.dim();
        let len = n.checked_mul(cols).ok_or_else(|| Error::InvalidArgument("N * cols overflows".into()))?;
        let xs = DenseMatrix::from_column_slice(n, cols, slice(x, len, "x")?);
        let out = f(&m.inner, &xs)?;
        if len > 0 {
            if y.is_null() {
                return Err(Failure::Null("y"));
            }
            std::ptr::copy_nonoverlapping(out.as_ptr(), y, len);
        }
        Ok(())
    })
}

/// Writes the binary container atomically.
///
/// # Safety
/// `matrix` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_save(matrix: *const HsMatrix, path: *const c_char) -> HsStatus {
    guard(|| {
        let m = non_null(matrix, "matrix")?;
        io::save(c_path(path)?, &m.inner)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_load(path: *const c_char, out: *mut *mut HsMatrix) -> HsStatus {
    guard(|| {
        let inner = io::load(c_path(path)?)?;
        store(out, HsMatrix { inner })
    })
}

/// Runs the structural checks; `*valid` is set to 1 when all pass.
///
/// # Safety
/// `matrix` must be a live handle; `valid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_matrix_validate(matrix: *const HsMatrix, valid: *mut c_int) -> HsStatus {
    guard(|| {
        let m = non_null(matrix, "matrix")?;
        let out = valid.as_mut().ok_or(Failure::Null("valid"))?;
        let report = validate(&m.inner);
        if !report.passed() {
            set_error(report.to_string());
        }
        *out = c_int::from(report.passed());
        Ok(())
    })
}
