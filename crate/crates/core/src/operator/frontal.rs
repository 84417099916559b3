use super::{check_input, LinearOracle};
use crate::error::{invalid, Error};
use crate::linalg::{DenseMatrix, GaussianRng};
use crate::Result;

/// Cholesky factor of a symmetric positive definite band matrix, stored by
/// rows: `L(i, j)` for `i - bw <= j <= i` lives at `i * (bw + 1) + j + bw - i`.
#[derive(Debug, Clone)]
struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = entry(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= l[i * w + k + bw - i] * l[j * w + k + bw - j];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Factorization(format!("band matrix not positive definite at row {i}")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + k + bw - i] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + i + bw - k] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }
}

/// Schur complement onto the middle column of a `height x width` grid
/// conduction problem. Every grid node is joined to its four neighbours by a
/// bar; nodes on the outer boundary are joined to a grounded exterior instead,
/// so unit conductivities reproduce the 5-point Laplacian.
#[derive(Debug, Clone)]
pub struct FrontalOracle {
    width: usize,
    height: usize,
    /// `height x (width + 1)`: entry `(i, k)` joins columns `k - 1` and `k` on row `i`.
    hbar: DenseMatrix,
    /// `(height + 1) x width`: entry `(k, j)` joins rows `k - 1` and `k` in column `j`.
    vbar: DenseMatrix,
    left: BandedCholesky,
    right: BandedCholesky,
}

/// Frontal matrix with bar conductivities drawn uniformly from `[1, 2]`.
pub fn schur_frontal_oracle(width: usize, n: usize, seed: u64) -> Result<FrontalOracle> {
    FrontalOracle::new(width, n, Some(seed))
}

impl FrontalOracle {
    /// `seed = None` sets every conductivity to 1.
    pub fn new(width: usize, height: usize, seed: Option<u64>) -> Result<Self> {
        if width < 3 || width % 2 == 0 {
            return Err(invalid(format!("grid width must be odd and at least 3, got {width}")));
        }
        if height < 2 {
            return Err(invalid(format!("separator length must be at least 2, got {height}")));
        }
        let mut rng = seed.map(GaussianRng::new);
        let mut draw = || match rng.as_mut() {
            Some(r) => 2.0 - r.uniform(),
            None => 1.0,
        };
        let mut hbar = DenseMatrix::zeros(height, width + 1);
        for i in 0..height {
            for k in 0..=width {
                hbar[(i, k)] = draw();
            }
        }
        let mut vbar = DenseMatrix::zeros(height + 1, width);
        for k in 0..=height {
            for j in 0..width {
                vbar[(k, j)] = draw();
            }
        }

        let half = (width - 1) / 2;
        let mut out = Self {
            width,
            height,
            hbar,
            vbar,
            left: BandedCholesky { n: 0, bw: 0, l: Vec::new() },
            right: BandedCholesky { n: 0, bw: 0, l: Vec::new() },
        };
        out.left = out.factor_block(0)?;
        out.right = out.factor_block(half + 1)?;
        Ok(out)
    }

    fn half(&self) -> usize {
        (self.width - 1) / 2
    }

    /// Grid matrix entry between nodes `(i1, j1)` and `(i2, j2)`.
    fn grid_entry(&self, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) -> f64 {
        if (i1, j1) == (i2, j2) {
            self.hbar[(i1, j1)] + self.hbar[(i1, j1 + 1)] + self.vbar[(i1, j1)] + self.vbar[(i1 + 1, j1)]
        } else if i1 == i2 && j1.abs_diff(j2) == 1 {
            -self.hbar[(i1, j1.max(j2))]
        } else if j1 == j2 && i1.abs_diff(i2) == 1 {
            -self.vbar[(i1.max(i2), j1)]
        } else {
            0.0
        }
    }

    /// Factors the block of grid columns `first..first + half`, ordered row by row.
    fn factor_block(&self, first: usize) -> Result<BandedCholesky> {
        let c = self.half();
        let node = |p: usize| (p / c, first + p % c);
        BandedCholesky::factor(self.height * c, c, |p, q| self.grid_entry(node(p), node(q)))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Dense grid matrix with nodes ordered row by row.
    pub fn grid_matrix(&self) -> DenseMatrix {
        let (w, h) = (self.width, self.height);
        DenseMatrix::from_fn(w * h, w * h, |p, q| self.grid_entry((p / w, p % w), (q / w, q % w)))
    }

    /// Grid indices (row-by-row numbering) of the left block, the right block
    /// and the separator.
    pub fn partition(&self) -> [Vec<usize>; 3] {
        let (w, c) = (self.width, self.half());
        let pick = |cols: std::ops::Range<usize>| -> Vec<usize> {
            (0..self.height).flat_map(|i| cols.clone().map(move |j| i * w + j)).collect()
        };
        [pick(0..c), pick(c + 1..w), pick(c..c + 1)]
    }

    fn eliminate(&self, x: &DenseMatrix, out: &mut DenseMatrix, chol: &BandedCholesky, bar_col: usize, near: usize) {
        let c = self.half();
        let mut t = vec![0.0; self.height * c];
        for s in 0..x.ncols() {
            t.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..self.height {
                t[i * c + near] = -self.hbar[(i, bar_col)] * x[(i, s)];
            }
            chol.solve_in_place(&mut t);
            for i in 0..self.height {
                out[(i, s)] += self.hbar[(i, bar_col)] * t[i * c + near];
            }
        }
    }
}

impl LinearOracle for FrontalOracle {
    fn dim(&self) -> usize {
        self.height
    }

    fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_input(self, x)?;
        let c = self.half();
        let mut out = DenseMatrix::zeros(self.height, x.ncols());
        for s in 0..x.ncols() {
            for i in 0..self.height {
                let mut v = self.grid_entry((i, c), (i, c)) * x[(i, s)];
                if i > 0 {
                    v += self.grid_entry((i, c), (i - 1, c)) * x[(i - 1, s)];
                }
                if i + 1 < self.height {
                    v += self.grid_entry((i, c), (i + 1, c)) * x[(i + 1, s)];
                }
                out[(i, s)] = v;
            }
        }
        self.eliminate(x, &mut out, &self.left, c, c - 1);
        self.eliminate(x, &mut out, &self.right, c + 1, 0);
        Ok(out)
    }

    fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}
