use super::{ensure_nonempty, DenseMatrix, FactorizationMode};
use crate::error::Error;
use crate::Result;

/// Thin SVD `a ≈ u * diag(s) * v^T` with `s` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        super::scale_columns(&self.u, &self.s) * self.v.transpose()
    }
}

/// SVD in one of the calling modes. `Tolerance(eps)` keeps exactly the
/// singular values strictly above `eps`.
pub fn svd(a: &DenseMatrix, mode: FactorizationMode) -> Result<Svd> {
    ensure_nonempty(a)?;
    mode.validate(a.nrows().min(a.ncols()))?;
    svd_unchecked(a, mode)
}

pub(crate) fn svd_unchecked(a: &DenseMatrix, mode: FactorizationMode) -> Result<Svd> {
    let (m, n) = a.shape();
    let full = m.min(n);
    if full == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(m, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
        });
    }

    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = fa
        .thin_svd()
        .map_err(|e| Error::Factorization(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let sv: Vec<f64> = (0..full).map(|i| fs[i]).collect();

    let mut order: Vec<usize> = (0..full).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));

    let keep = match mode {
        FactorizationMode::Full => full,
        FactorizationMode::FixedRank(k) => k.min(full),
        FactorizationMode::Tolerance(eps) => order.iter().take_while(|&&i| sv[i] > eps).count(),
        FactorizationMode::RelativeTolerance(eps) => {
            let top = sv[order[0]];
            order.iter().take_while(|&&i| sv[i] > eps * top).count()
        }
    };
    let order = &order[..keep];

    let mut uk = DenseMatrix::zeros(m, keep);
    let mut vk = DenseMatrix::zeros(n, keep);
    let mut s = Vec::with_capacity(keep);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..m {
            uk[(i, dst)] = fu[(i, src)];
        }
        for i in 0..n {
            vk[(i, dst)] = fv[(i, src)];
        }
        s.push(sv[src].max(0.0));
    }
    Ok(Svd { u: uk, s, v: vk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, spectral_norm, testutil::planted_spectrum};

    #[test]
    fn diagonal_fixed_rank() {
        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let f = svd(&a, FactorizationMode::FixedRank(2)).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-14 && (f.s[1] - 2.0).abs() < 1e-14);
        let err = spectral_norm(&(&a - f.reconstruct()));
        assert!((err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = svd(&DenseMatrix::zeros(4, 4), FactorizationMode::Tolerance(1e-9)).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.u.shape(), (4, 0));
    }

    #[test]
    fn planted_spectrum_tolerance_rank() {
        let sigma: Vec<f64> = (1..=20).map(|j| 10f64.powi(-j)).collect();
        let a = planted_spectrum(30, 20, &sigma, 5);
        let f = svd(&a, FactorizationMode::Tolerance(3e-6)).unwrap();
        assert_eq!(f.rank(), 5);
        let f = svd(&a, FactorizationMode::Tolerance(3e-9)).unwrap();
        assert_eq!(f.rank(), 8);
        assert!(orthonormality_defect(&f.u) < 1e-13);
        assert!(orthonormality_defect(&f.v) < 1e-13);
    }

    #[test]
    fn fixed_rank_error_is_next_singular_value() {
        let sigma = [5.0, 2.0, 1.0, 0.5, 0.25, 0.125];
        let a = planted_spectrum(12, 9, &sigma, 8);
        for k in 1..sigma.len() {
            let f = svd(&a, FactorizationMode::FixedRank(k)).unwrap();
            let err = spectral_norm(&(&a - f.reconstruct()));
            assert!((err - sigma[k]).abs() <= 1e-12 * sigma[0]);
        }
    }

    #[test]
    fn relative_threshold() {
        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![100.0, 1.0, 1e-3]));
        let f = svd(&a, FactorizationMode::RelativeTolerance(1e-4)).unwrap();
        assert_eq!(f.rank(), 2);
        let f = svd(&a, FactorizationMode::Tolerance(1e-4)).unwrap();
        assert_eq!(f.rank(), 3);
    }
}
