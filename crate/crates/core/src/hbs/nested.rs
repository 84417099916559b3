use crate::linalg::DenseMatrix;
use crate::tree::{IndexTree, NodeId};

/// One side of a nested basis. Nodes on the frontier hold long bases
/// (`n_τ x k_τ`); non-leaf nodes above the frontier hold short transfer
/// matrices (`(k_α + k_β) x k_τ`).
#[derive(Clone, Copy)]
pub(crate) struct Side<'a> {
    pub bases: &'a [DenseMatrix],
    /// Frontier = nodes on this level plus leaves above it.
    pub frontier: usize,
}

impl Side<'_> {
    fn is_frontier(&self, tree: &IndexTree, id: NodeId) -> bool {
        let nd = tree.node(id);
        nd.level == self.frontier || (nd.level < self.frontier && nd.is_leaf())
    }
}

/// Sum of the sibling blocks on levels `1..=max_pair_level`, applied through
/// nested bases: `A(I_α, I_β) = Ū_α b[α] V̄_β^T`. With `adjoint` the roles of
/// the sides flip and each coupling is transposed; pass the `U` side as `up`
/// and the `V` side as `down` in that case.
pub(crate) fn nested_apply(
    tree: &IndexTree,
    up: Side<'_>,
    down: Side<'_>,
    b: &[DenseMatrix],
    max_pair_level: usize,
    x: &DenseMatrix,
    adjoint: bool,
) -> DenseMatrix {
    let s = x.ncols();
    let mut out = DenseMatrix::zeros(x.nrows(), s);
    let top = max_pair_level.min(tree.depth());
    if top == 0 {
        return out;
    }
    let count = tree.node_count();

    // upward pass: outgoing expansions
    let mut q: Vec<DenseMatrix> = vec![DenseMatrix::zeros(0, s); count];
    for level in (1..=up.frontier.min(tree.depth())).rev() {
        for &id in tree.nodes_on_level(level).expect("level in range") {
            let basis = &up.bases[id];
            if up.is_frontier(tree, id) {
                let nd = tree.node(id);
                q[id] = basis.tr_mul(&x.rows(nd.start, nd.len()));
            } else if let Some([a, c]) = tree.children(id) {
                let stacked = crate::linalg::vstack(&q[a], &q[c]);
                q[id] = basis.tr_mul(&stacked);
            }
        }
    }

    // sibling exchange
    let mut w: Vec<DenseMatrix> = (0..count)
        .map(|id| DenseMatrix::zeros(if id == 0 { 0 } else { down.bases[id].ncols() }, s))
        .collect();
    for level in 1..=top {
        for &id in tree.nodes_on_level(level).expect("level in range") {
            let sib = tree.sibling(id).expect("non-root");
            if adjoint {
                w[id].gemm_tr(1.0, &b[sib], &q[sib], 1.0);
            } else {
                w[id].gemm(1.0, &b[id], &q[sib], 1.0);
            }
        }
    }

    // downward pass: incoming expansions to the frontier
    for level in 1..=down.frontier.min(tree.depth()) {
        for &id in tree.nodes_on_level(level).expect("level in range") {
            let basis = &down.bases[id];
            if down.is_frontier(tree, id) {
                let nd = tree.node(id);
                out.rows_mut(nd.start, nd.len()).gemm(1.0, basis, &w[id], 1.0);
            } else if let Some([a, c]) = tree.children(id) {
                let t = basis * &w[id];
                let ka = w[a].nrows();
                w[a] += t.rows(0, ka);
                w[c] += t.rows(ka, t.nrows() - ka);
            }
        }
    }
    out
}

/// Finished nested-basis representation: long bases at leaves, short
/// transfers elsewhere, couplings `b[α] = B_{α, sibling}` and leaf diagonals.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Nested {
    pub tree: IndexTree,
    pub u: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub b: Vec<DenseMatrix>,
    pub d: Vec<DenseMatrix>,
}

impl Nested {
    pub fn truncated(&self, level: usize, x: &DenseMatrix, adjoint: bool) -> DenseMatrix {
        let depth = self.tree.depth();
        let u = Side { bases: &self.u, frontier: depth };
        let v = Side { bases: &self.v, frontier: depth };
        if adjoint {
            nested_apply(&self.tree, u, v, &self.b, level, x, true)
        } else {
            nested_apply(&self.tree, v, u, &self.b, level, x, false)
        }
    }

    pub fn full(&self, x: &DenseMatrix, adjoint: bool) -> DenseMatrix {
        let mut out = self.truncated(self.tree.depth(), x, adjoint);
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
        out
    }

    pub fn scalar_count(&self) -> usize {
        [&self.u, &self.v, &self.b, &self.d]
            .iter()
            .flat_map(|list| list.iter())
            .map(DenseMatrix::len)
            .sum()
    }

    /// Rank of a node's row basis, column basis.
    pub fn ranks(&self, id: NodeId) -> (usize, usize) {
        (self.u[id].ncols(), self.v[id].ncols())
    }

    pub fn max_rank(&self) -> usize {
        (1..self.tree.node_count())
            .map(|id| {
                let (a, b) = self.ranks(id);
                a.max(b)
            })
            .max()
            .unwrap_or(0)
    }

    /// Checks that every stored block has the shape the tree implies.
    pub fn check_shapes(&self) -> crate::Result<()> {
        use crate::error::Error;
        let t = &self.tree;
        let count = t.node_count();
        if [self.u.len(), self.v.len(), self.b.len(), self.d.len()].iter().any(|&l| l != count) {
            return Err(Error::Format("per-node arrays do not match the tree".into()));
        }
        let bad = |id: NodeId, what: &str| Err(Error::Format(format!("{what} of node {id} has the wrong shape")));
        for id in 0..count {
            let nd = t.node(id);
            let want_d = if nd.is_leaf() { (nd.len(), nd.len()) } else { (0, 0) };
            if self.d[id].shape() != want_d {
                return bad(id, "diagonal block");
            }
            if id == t.root() {
                if !self.u[id].is_empty() || !self.v[id].is_empty() || !self.b[id].is_empty() {
                    return bad(id, "root basis");
                }
                continue;
            }
            for bases in [&self.u, &self.v] {
                let rows = match t.children(id) {
                    None => nd.len(),
                    Some([a, c]) => bases[a].ncols() + bases[c].ncols(),
                };
                if bases[id].nrows() != rows {
                    return bad(id, "basis");
                }
            }
            let sib = t.sibling(id).expect("non-root");
            if self.b[id].shape() != (self.u[id].ncols(), self.v[sib].ncols()) {
                return bad(id, "sibling coupling");
            }
        }
        Ok(())
    }
}
