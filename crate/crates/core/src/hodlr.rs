//! HODLR format: every sibling block `A(I_α, I_β)` stored as an independent
//! low-rank factorization `U_α diag(s_α) V_β^T`.

use crate::error::{check_dim, invalid, Error};
use crate::linalg::{range_basis, svd_unchecked, DenseMatrix, FactorizationMode, GaussianRng};
use crate::operator::LinearOracle;
use crate::sampling::{basis_probe, check_sample_width, child_sample, leaf_blocks, leaf_probe, sibling_probe};
use crate::tree::{IndexTree, NodeId};
use crate::Result;

/// Per non-root node `α` with sibling `β`: `u[α]` and `s[α]` give the row
/// side of `A(I_α, I_β)`, and `v[α]` the column side of `A(I_β, I_α)`, so
/// `A(I_α, I_β) ≈ u[α] diag(s[α]) v[β]^T`. Leaves carry dense `d[τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodlrMatrix {
    tree: IndexTree,
    u: Vec<DenseMatrix>,
    s: Vec<Vec<f64>>,
    v: Vec<DenseMatrix>,
    d: Vec<DenseMatrix>,
    levels_built: usize,
}

impl HodlrMatrix {
    /// Assembles a matrix from stored parts, checking every shape.
    pub fn from_parts(
        tree: IndexTree,
        u: Vec<DenseMatrix>,
        s: Vec<Vec<f64>>,
        v: Vec<DenseMatrix>,
        d: Vec<DenseMatrix>,
    ) -> Result<Self> {
        let count = tree.node_count();
        if [u.len(), s.len(), v.len(), d.len()].iter().any(|&l| l != count) {
            return Err(Error::Format("per-node arrays do not match the tree".into()));
        }
        for id in 0..count {
            let nd = tree.node(id);
            let (n, k) = (nd.len(), s[id].len());
            if id == tree.root() {
                if !u[id].is_empty() || !v[id].is_empty() || k != 0 {
                    return Err(Error::Format("root carries no factors".into()));
                }
            } else {
                let sib = tree.sibling(id).expect("non-root");
                if u[id].shape() != (n, k) || v[sib].shape() != (tree.node(sib).len(), k) {
                    return Err(Error::Format(format!("factor shapes of node {id} are inconsistent")));
                }
            }
            let want = if nd.is_leaf() { (n, n) } else { (0, 0) };
            if d[id].shape() != want {
                return Err(Error::Format(format!("diagonal block of node {id} has the wrong shape")));
            }
        }
        let levels_built = tree.depth();
        Ok(Self {
            tree,
            u,
            s,
            v,
            d,
            levels_built,
        })
    }

    fn empty(tree: IndexTree) -> Self {
        let count = tree.node_count();
        let nodes: Vec<(usize, bool)> = tree.nodes().iter().map(|nd| (nd.len(), nd.is_leaf())).collect();
        Self {
            u: nodes.iter().map(|&(n, _)| DenseMatrix::zeros(n, 0)).collect(),
            s: vec![Vec::new(); count],
            v: nodes.iter().map(|&(n, _)| DenseMatrix::zeros(n, 0)).collect(),
            d: vec![DenseMatrix::zeros(0, 0); count],
            tree,
            levels_built: 0,
        }
        .with_root_cleared()
    }

    fn with_root_cleared(mut self) -> Self {
        self.u[0] = DenseMatrix::zeros(0, 0);
        self.v[0] = DenseMatrix::zeros(0, 0);
        self
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.tree.size()
    }

    pub fn u(&self, id: NodeId) -> &DenseMatrix {
        &self.u[id]
    }

    pub fn s(&self, id: NodeId) -> &[f64] {
        &self.s[id]
    }

    pub fn v(&self, id: NodeId) -> &DenseMatrix {
        &self.v[id]
    }

    pub fn diagonal(&self, id: NodeId) -> &DenseMatrix {
        &self.d[id]
    }

    /// Rank of the block `A(I_α, I_sibling)`.
    pub fn block_rank(&self, id: NodeId) -> usize {
        self.s[id].len()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.apply_truncated(self.tree.depth(), x, false)?;
        self.add_diagonal(x, &mut out, false);
        Ok(out)
    }

    pub fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.apply_truncated(self.tree.depth(), x, true)?;
        self.add_diagonal(x, &mut out, true);
        Ok(out)
    }

    /// Applies `A^(level)` (or its adjoint): the sibling blocks on levels
    /// `1..=level`, no diagonal blocks.
    pub fn apply_truncated(&self, level: usize, x: &DenseMatrix, adjoint: bool) -> Result<DenseMatrix> {
        check_dim(self.dim(), x.nrows())?;
        if level > self.levels_built {
            return Err(Error::LevelNotBuilt {
                requested: level,
                built: self.levels_built,
            });
        }
        let mut out = DenseMatrix::zeros(x.nrows(), x.ncols());
        for lvl in 1..=level {
            for &a in self.tree.nodes_on_level(lvl)? {
                let b = self.tree.sibling(a).expect("non-root");
                let (na, nb) = (self.tree.node(a), self.tree.node(b));
                if self.s[a].is_empty() {
                    continue;
                }
                // block A(I_a, I_b) = u[a] diag(s[a]) v[b]^T
                if adjoint {
                    let t = self.u[a].tr_mul(&x.rows(na.start, na.len()));
                    let t = scale_rows(t, &self.s[a]);
                    out.rows_mut(nb.start, nb.len()).gemm(1.0, &self.v[b], &t, 1.0);
                } else {
                    let t = self.v[b].tr_mul(&x.rows(nb.start, nb.len()));
                    let t = scale_rows(t, &self.s[a]);
                    out.rows_mut(na.start, na.len()).gemm(1.0, &self.u[a], &t, 1.0);
                }
            }
        }
        Ok(out)
    }

    fn add_diagonal(&self, x: &DenseMatrix, out: &mut DenseMatrix, adjoint: bool) {
        for leaf in self.tree.leaves() {
            let nd = self.tree.node(leaf);
            let xs = x.rows(nd.start, nd.len());
            let mut dst = out.rows_mut(nd.start, nd.len());
            if adjoint {
                dst.gemm_tr(1.0, &self.d[leaf], &xs, 1.0);
            } else {
                dst.gemm(1.0, &self.d[leaf], &xs, 1.0);
            }
        }
    }

    /// Bytes of floating point data held by the representation.
    pub fn storage_bytes(&self) -> usize {
        let scalars: usize = (0..self.tree.node_count())
            .map(|id| self.u[id].len() + self.s[id].len() + self.v[id].len() + self.d[id].len())
            .sum();
        scalars * std::mem::size_of::<f64>()
    }

    /// Largest block rank.
    pub fn max_rank(&self) -> usize {
        self.s.iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn scale_rows(mut t: DenseMatrix, s: &[f64]) -> DenseMatrix {
    for (i, &si) in s.iter().enumerate() {
        t.row_mut(i).scale_mut(si);
    }
    t
}

/// Randomized HODLR compression from products with `A` and `A^*`.
///
/// Each level draws `sample_width` Gaussian columns per child (clipped to
/// the child size), removes the contribution of coarser levels, and
/// truncates sibling blocks at singular values `<= eps`. Uses exactly
/// `L * 2 * sample_width + max_leaf` columns of `A` and
/// `L * 2 * sample_width` columns of `A^*`.
pub fn hodlr_compress(
    oracle: &(impl LinearOracle + ?Sized),
    tree: &IndexTree,
    sample_width: usize,
    eps: f64,
    seed: u64,
) -> Result<HodlrMatrix> {
    check_dim(tree.size(), oracle.dim())?;
    check_sample_width(sample_width)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("tolerance {eps} outside (0, 1)")));
    }
    let r = sample_width;
    let mut h = HodlrMatrix::empty(tree.clone());
    let mut rng = GaussianRng::new(seed);

    for level in 1..=tree.depth() {
        let parents: Vec<NodeId> = tree.parents_on_level(level - 1).collect();

        let omega = sibling_probe(tree, &parents, r, &mut rng);
        let y = oracle.apply(&omega)? - h.apply_truncated(level - 1, &omega, false)?;
        let mut basis: Vec<(NodeId, DenseMatrix)> = Vec::with_capacity(2 * parents.len());
        for &tau in &parents {
            let [a, b] = tree.children(tau).expect("parent node");
            let (ra, rb) = (r.min(tree.node(a).len()), r.min(tree.node(b).len()));
            // rows of α sampled through columns of β, and vice versa
            basis.push((a, range_basis(&child_sample(tree, &y, a, r, rb))));
            basis.push((b, range_basis(&child_sample(tree, &y, b, 0, ra))));
        }
        for (id, q) in basis {
            h.u[id] = q;
        }

        let omega = basis_probe(tree, &parents, r, |id| &h.u[id]);
        let z = oracle.apply_adjoint(&omega)? - h.apply_truncated(level - 1, &omega, true)?;
        for &tau in &parents {
            let [a, b] = tree.children(tau).expect("parent node");
            for (row, col, offset) in [(b, a, r), (a, b, 0)] {
                // z(I_col, ·) = A(I_row, I_col)^T u[row]
                let zc = child_sample(tree, &z, col, offset, h.u[row].ncols());
                let f = svd_unchecked(&zc, FactorizationMode::Tolerance(eps))?;
                h.u[row] = &h.u[row] * &f.v;
                h.s[row] = f.s;
                h.v[col] = f.u;
            }
        }
        h.levels_built = level;
    }

    let omega = leaf_probe(tree);
    let y = oracle.apply(&omega)? - h.apply_truncated(tree.depth(), &omega, false)?;
    h.d = leaf_blocks(tree, &y);
    Ok(h)
}
