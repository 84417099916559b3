use super::qr::{householder_cpqr, stop_for, Stop};
use super::{ensure_nonempty, DenseMatrix, FactorizationMode};
use crate::Result;

/// Column ID `a ≈ a.select_columns(skeleton) * x`, where `x` contains the
/// `k x k` identity in the skeleton columns.
#[derive(Debug, Clone)]
pub struct InterpolativeDecomposition {
    /// `k x n` interpolation matrix.
    pub x: DenseMatrix,
    /// Full column permutation; the first `rank` entries are the skeleton.
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl InterpolativeDecomposition {
    pub fn skeleton(&self) -> &[usize] {
        &self.perm[..self.rank]
    }
}

const FULL_RANK_CUTOFF: f64 = 1e-14;

pub fn id_decompose(a: &DenseMatrix, mode: FactorizationMode) -> Result<InterpolativeDecomposition> {
    ensure_nonempty(a)?;
    mode.validate(a.nrows().min(a.ncols()))?;
    Ok(id_unchecked(a, mode))
}

/// As `id_decompose`, but an empty input yields a rank-0 decomposition.
pub(crate) fn id_unchecked(a: &DenseMatrix, mode: FactorizationMode) -> InterpolativeDecomposition {
    let n = a.ncols();
    if a.is_empty() {
        return InterpolativeDecomposition {
            x: DenseMatrix::zeros(0, n),
            perm: (0..n).collect(),
            rank: 0,
        };
    }
    let stop = match mode {
        FactorizationMode::Full => Stop::Steps(a.nrows().min(n)),
        _ => stop_for(a, mode),
    };
    let f = householder_cpqr(a, stop);
    let r = &f.packed;

    let mut k = f.rank;
    if mode == FactorizationMode::Full && k > 0 {
        let lead = r[(0, 0)].abs();
        k = (0..k)
            .take_while(|&j| r[(j, j)].abs() > FULL_RANK_CUTOFF * lead)
            .count();
    }

    // T = R11^{-1} R12 by back substitution; a zero pivot zeroes its row.
    let rest = n - k;
    let mut t = DenseMatrix::zeros(k, rest);
    for c in 0..rest {
        for i in (0..k).rev() {
            let mut s = r[(i, k + c)];
            for j in i + 1..k {
                s -= r[(i, j)] * t[(j, c)];
            }
            let d = r[(i, i)];
            t[(i, c)] = if d == 0.0 { 0.0 } else { s / d };
        }
    }

    let mut x = DenseMatrix::zeros(k, n);
    for i in 0..k {
        x[(i, f.perm[i])] = 1.0;
    }
    for c in 0..rest {
        x.set_column(f.perm[k + c], &t.column(c));
    }
    InterpolativeDecomposition {
        x,
        perm: f.perm,
        rank: k,
    }
}
