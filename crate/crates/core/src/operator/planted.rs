//! Dense matrices with exactly known hierarchical structure.

use crate::linalg::{orthonormalize, scale_columns, DenseMatrix, GaussianRng};
use crate::tree::IndexTree;
use crate::Result;

fn orthonormal(rng: &mut GaussianRng, n: usize, k: usize) -> DenseMatrix {
    orthonormalize(&rng.block(n, k))
}

fn fill_leaf_diagonals(a: &mut DenseMatrix, tree: &IndexTree, rng: &mut GaussianRng) {
    for leaf in tree.leaves() {
        let nd = tree.node(leaf);
        let d = rng.block(nd.len(), nd.len()) / (nd.len() as f64).sqrt();
        a.view_mut((nd.start, nd.start), (nd.len(), nd.len())).copy_from(&d);
    }
}

/// Every sibling block `A(I_α, I_β)` is an independent random matrix of rank
/// `min(rank, n_α, n_β)` with singular values in `[0.1, 1]`.
pub fn planted_hodlr(n: usize, leaf_size: usize, rank: usize, seed: u64) -> Result<DenseMatrix> {
    let tree = IndexTree::build(n, leaf_size)?;
    let mut rng = GaussianRng::new(seed);
    let mut a = DenseMatrix::zeros(n, n);
    for tau in 0..tree.node_count() {
        let Some(pair) = tree.children(tau) else { continue };
        for (row, col) in [(pair[0], pair[1]), (pair[1], pair[0])] {
            let (r, c) = (tree.node(row), tree.node(col));
            let k = rank.min(r.len()).min(c.len());
            let u = orthonormal(&mut rng, r.len(), k);
            let v = orthonormal(&mut rng, c.len(), k);
            let s: Vec<f64> = (0..k).map(|_| 0.1 + 0.9 * rng.uniform()).collect();
            let blk = scale_columns(&u, &s) * v.transpose();
            a.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(&blk);
        }
    }
    fill_leaf_diagonals(&mut a, &tree, &mut rng);
    Ok(a)
}

/// Nested-basis matrix: random orthonormal leaf bases and short transfer
/// matrices telescoped into long bases, with Gaussian sibling couplings.
/// Every neutered row or column block has rank at most `rank`.
pub fn planted_hbs(n: usize, leaf_size: usize, rank: usize, seed: u64) -> Result<DenseMatrix> {
    let tree = IndexTree::build(n, leaf_size)?;
    let mut rng = GaussianRng::new(seed);
    let count = tree.node_count();
    let mut u_long: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, 0); count];
    let mut v_long: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, 0); count];

    for tau in tree.bottom_up() {
        let len = tree.node(tau).len();
        match tree.children(tau) {
            None => {
                let k = rank.min(len);
                u_long[tau] = orthonormal(&mut rng, len, k);
                v_long[tau] = orthonormal(&mut rng, len, k);
            }
            Some([a, b]) => {
                for long in [&mut u_long, &mut v_long] {
                    let (ka, kb) = (long[a].ncols(), long[b].ncols());
                    let k = rank.min(ka + kb);
                    let t = orthonormal(&mut rng, ka + kb, k);
                    let mut out = DenseMatrix::zeros(len, k);
                    let na = long[a].nrows();
                    out.rows_mut(0, na).copy_from(&(&long[a] * t.rows(0, ka)));
                    out.rows_mut(na, len - na).copy_from(&(&long[b] * t.rows(ka, kb)));
                    long[tau] = out;
                }
            }
        }
    }

    let mut a = DenseMatrix::zeros(n, n);
    for tau in 0..count {
        let Some(pair) = tree.children(tau) else { continue };
        for (row, col) in [(pair[0], pair[1]), (pair[1], pair[0])] {
            let (u, v) = (&u_long[row], &v_long[col]);
            let b = rng.block(u.ncols(), v.ncols()) / (rank as f64).sqrt();
            let blk = u * b * v.transpose();
            let (r, c) = (tree.node(row), tree.node(col));
            a.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(&blk);
        }
    }
    fill_leaf_diagonals(&mut a, &tree, &mut rng);
    Ok(a)
}
