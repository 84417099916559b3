//! Probe matrices shared by the HODLR and HBS sweeps.

use crate::linalg::{DenseMatrix, GaussianRng};
use crate::tree::{IndexTree, NodeId};

/// `N x 2r` block with a Gaussian `n_α x min(r, n_α)` block on the rows of
/// every left child (columns `0..r`) and likewise for every right child
/// (columns `r..2r`).
pub(crate) fn sibling_probe(tree: &IndexTree, parents: &[NodeId], r: usize, rng: &mut GaussianRng) -> DenseMatrix {
    let mut omega = DenseMatrix::zeros(tree.size(), 2 * r);
    for &tau in parents {
        let [a, b] = tree.children(tau).expect("parent node");
        for (child, offset) in [(a, 0), (b, r)] {
            let nd = tree.node(child);
            let w = r.min(nd.len());
            let g = rng.block(nd.len(), w);
            omega.view_mut((nd.start, offset), (nd.len(), w)).copy_from(&g);
        }
    }
    omega
}

/// Places `basis(child)` on the rows of every child, left children in
/// columns `0..r` and right children in columns `r..2r`.
pub(crate) fn basis_probe<'a>(
    tree: &IndexTree,
    parents: &[NodeId],
    r: usize,
    basis: impl Fn(NodeId) -> &'a DenseMatrix,
) -> DenseMatrix {
    let mut omega = DenseMatrix::zeros(tree.size(), 2 * r);
    for &tau in parents {
        let [a, b] = tree.children(tau).expect("parent node");
        for (child, offset) in [(a, 0), (b, r)] {
            let nd = tree.node(child);
            let q = basis(child);
            omega.view_mut((nd.start, offset), (nd.len(), q.ncols())).copy_from(q);
        }
    }
    omega
}

/// Padded identity: `eye(n_τ)` on the rows of every leaf, width = largest leaf.
pub(crate) fn leaf_probe(tree: &IndexTree) -> DenseMatrix {
    let mut omega = DenseMatrix::zeros(tree.size(), tree.max_leaf_len());
    for leaf in tree.leaves() {
        let nd = tree.node(leaf);
        for i in 0..nd.len() {
            omega[(nd.start + i, i)] = 1.0;
        }
    }
    omega
}

/// Reads the diagonal blocks back out of `A * leaf_probe`.
pub(crate) fn leaf_blocks(tree: &IndexTree, y: &DenseMatrix) -> Vec<DenseMatrix> {
    (0..tree.node_count())
        .map(|id| {
            let nd = tree.node(id);
            if nd.is_leaf() {
                y.view((nd.start, 0), (nd.len(), nd.len())).into_owned()
            } else {
                DenseMatrix::zeros(0, 0)
            }
        })
        .collect()
}

/// Rows `I_child` of columns `offset..offset + width` of a sample block.
pub(crate) fn child_sample(tree: &IndexTree, y: &DenseMatrix, child: NodeId, offset: usize, width: usize) -> DenseMatrix {
    let nd = tree.node(child);
    y.view((nd.start, offset), (nd.len(), width)).into_owned()
}

pub(crate) fn check_sample_width(r: usize) -> crate::Result<()> {
    if r == 0 {
        Err(crate::error::invalid("sample width must be positive"))
    } else {
        Ok(())
    }
}
