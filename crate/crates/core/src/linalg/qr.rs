use super::{ensure_nonempty, DenseMatrix, FactorizationMode};
use crate::Result;

/// Column-pivoted QR: `a.select_columns(perm) ≈ q * r`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// `m x k`, orthonormal columns.
    pub q: DenseMatrix,
    /// `k x n`, upper trapezoidal, columns in pivot order.
    pub r: DenseMatrix,
    /// Full column permutation; the first `k` entries are the pivots.
    pub perm: Vec<usize>,
}

impl PivotedQr {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stop {
    Steps(usize),
    /// Stop once the Frobenius norm of the trailing block drops to this value.
    Residual(f64),
}

/// Householder factorization in LAPACK's compact layout: `r` on and above
/// the diagonal, reflector tails below it.
pub(crate) struct CompactQr {
    pub packed: DenseMatrix,
    pub tau: Vec<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

pub(crate) fn stop_for(a: &DenseMatrix, mode: FactorizationMode) -> Stop {
    let full = a.nrows().min(a.ncols());
    match mode {
        FactorizationMode::Full => Stop::Steps(full),
        FactorizationMode::FixedRank(k) => Stop::Steps(k.min(full)),
        FactorizationMode::Tolerance(eps) | FactorizationMode::RelativeTolerance(eps) => {
            let max_col = a
                .column_iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            Stop::Residual(eps * max_col)
        }
    }
}

/// Column-pivoted Householder QR. Pivot ties go to the lowest column index.
pub(crate) fn householder_cpqr(a: &DenseMatrix, stop: Stop) -> CompactQr {
    let (m, n) = a.shape();
    let mut packed = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms2: Vec<f64> = packed.column_iter().map(|c| c.norm_squared()).collect();
    let mut tau = Vec::new();
    let max_steps = match stop {
        Stop::Steps(k) => k.min(m).min(n),
        Stop::Residual(_) => m.min(n),
    };

    let data = packed.as_mut_slice();
    let mut rank = 0;
    for j in 0..max_steps {
        if let Stop::Residual(limit) = stop {
            let trailing: f64 = norms2[j..].iter().sum();
            if trailing.sqrt() <= limit {
                break;
            }
        }

        let mut p = j;
        for c in j + 1..n {
            if norms2[c] > norms2[p] {
                p = c;
            }
        }
        if p != j {
            for i in 0..m {
                data.swap(j * m + i, p * m + i);
            }
            perm.swap(j, p);
            norms2.swap(j, p);
        }

        let t = make_reflector(&mut data[j * m + j..(j + 1) * m]);
        tau.push(t);

        let (head, tail) = data.split_at_mut((j + 1) * m);
        let v = &head[j * m + j..(j + 1) * m];
        for c in 0..n - j - 1 {
            let col = &mut tail[c * m + j..(c + 1) * m];
            apply_reflector(v, t, col);
        }
        for c in j + 1..n {
            let col = &data[c * m + j + 1..(c + 1) * m];
            norms2[c] = col.iter().map(|x| x * x).sum();
        }
        rank = j + 1;
    }

    CompactQr {
        packed,
        tau,
        perm,
        rank,
    }
}

/// Turns `x` into `beta * e_1` in place; the tail of `x` receives the
/// reflector vector (with implicit leading 1). Returns `tau`.
fn make_reflector(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let tail_norm2: f64 = x[1..].iter().map(|v| v * v).sum();
    if tail_norm2 == 0.0 {
        return 0.0;
    }
    let norm = (alpha * alpha + tail_norm2).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    x[0] = beta;
    tau
}

/// `col <- (I - tau v v^T) col`, where `v[0]` is taken to be 1.
fn apply_reflector(v: &[f64], tau: f64, col: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let mut w = col[0];
    for (a, b) in v[1..].iter().zip(&col[1..]) {
        w += a * b;
    }
    w *= tau;
    col[0] -= w;
    for (c, a) in col[1..].iter_mut().zip(&v[1..]) {
        *c -= w * a;
    }
}

impl CompactQr {
    /// Explicit `m x rank` orthonormal factor.
    pub fn q(&self) -> DenseMatrix {
        let m = self.packed.nrows();
        let k = self.rank;
        let mut q = DenseMatrix::zeros(m, k);
        for i in 0..k {
            q[(i, i)] = 1.0;
        }
        let src = self.packed.as_slice();
        let qd = q.as_mut_slice();
        for j in (0..k).rev() {
            let v = &src[j * m + j..(j + 1) * m];
            for c in j..k {
                apply_reflector(v, self.tau[j], &mut qd[c * m + j..(c + 1) * m]);
            }
        }
        q
    }

    /// `rank x n` upper-trapezoidal factor (columns in pivot order).
    pub fn r(&self) -> DenseMatrix {
        let n = self.packed.ncols();
        DenseMatrix::from_fn(self.rank, n, |i, j| {
            if i <= j {
                self.packed[(i, j)]
            } else {
                0.0
            }
        })
    }
}

/// Column-pivoted QR in one of the three calling modes.
pub fn qr(a: &DenseMatrix, mode: FactorizationMode) -> Result<PivotedQr> {
    ensure_nonempty(a)?;
    mode.validate(a.nrows().min(a.ncols()))?;
    let f = householder_cpqr(a, stop_for(a, mode));
    Ok(PivotedQr {
        q: f.q(),
        r: f.r(),
        perm: f.perm,
    })
}

/// Orthonormal basis (`m x min(m, n)`) for the column space of `a`.
/// Rank-deficient inputs are completed with arbitrary orthonormal columns.
pub(crate) fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    if a.is_empty() {
        return DenseMatrix::zeros(a.nrows(), 0);
    }
    householder_cpqr(a, Stop::Steps(a.nrows().min(a.ncols()))).q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, testutil::planted_spectrum, GaussianRng};

    fn permuted(a: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
        a.select_columns(perm)
    }

    #[test]
    fn identity_full() {
        let a = DenseMatrix::identity(3, 3);
        let f = qr(&a, FactorizationMode::Full).unwrap();
        for i in 0..3 {
            assert!((f.r[(i, i)].abs() - 1.0).abs() < 1e-15);
        }
        assert!(orthonormality_defect(&f.q) < 1e-15);
        assert!((permuted(&a, &f.perm) - &f.q * &f.r).norm() < 1e-15);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = DenseMatrix::from_column_slice(3, 1, &[1.0, 2.0, 2.0]);
        let v = DenseMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let a = &u * v.transpose();
        let f = qr(&a, FactorizationMode::Tolerance(1e-12)).unwrap();
        assert_eq!(f.rank(), 1);
        // the trailing block is left unfactored and bounded by the tolerance
        let resid = permuted(&a, &f.perm) - &f.q * &f.r;
        assert!(resid.norm() <= 1e-12 * 3.0);
    }

    #[test]
    fn random_square_round_trip() {
        let mut rng = GaussianRng::new(3);
        let a = rng.block(50, 50);
        let f = qr(&a, FactorizationMode::FixedRank(50)).unwrap();
        let norm = crate::linalg::spectral_norm(&a);
        assert!((permuted(&a, &f.perm) - &f.q * &f.r).norm() <= 1e-12 * norm);
        assert!(orthonormality_defect(&f.q) < 1e-13 * 50.0);
        for i in 1..50 {
            assert!(f.r[(i, i)].abs() <= f.r[(i - 1, i - 1)].abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tolerance_mode_bounds_residual() {
        let sigma: Vec<f64> = (0..12).map(|j| 10f64.powi(-j)).collect();
        let a = planted_spectrum(40, 30, &sigma, 11);
        let norm = crate::linalg::spectral_norm(&a);
        for eps in [1e-3, 1e-6, 1e-9] {
            let f = qr(&a, FactorizationMode::Tolerance(eps)).unwrap();
            let resid = crate::linalg::spectral_norm(&(permuted(&a, &f.perm) - &f.q * &f.r));
            assert!(resid <= eps * norm, "eps {eps}: {resid}");
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        let a = DenseMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let f = qr(&a, FactorizationMode::FixedRank(1)).unwrap();
        assert_eq!(f.perm[0], 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(qr(&DenseMatrix::zeros(0, 3), FactorizationMode::Full).is_err());
        let a = DenseMatrix::identity(3, 3);
        assert!(qr(&a, FactorizationMode::FixedRank(4)).is_err());
        assert!(qr(&a, FactorizationMode::FixedRank(0)).is_err());
        assert!(qr(&a, FactorizationMode::Tolerance(0.0)).is_err());
    }
}
