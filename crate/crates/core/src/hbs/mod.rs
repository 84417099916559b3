//! HBS format: nested bases built from short transfer matrices, compressed
//! with a fixed sample rank, and its conversion to the interpolative HBS-ID
//! form with adaptive ranks.

mod compress;
mod convert;
mod nested;

use crate::error::{check_dim, Error};
use crate::linalg::DenseMatrix;
use crate::tree::{IndexTree, NodeId};
use crate::Result;

pub use compress::hbs_compress;
pub use convert::hbs_to_hbsid;
pub(crate) use nested::Nested;

/// HBS matrix with the sample spectra `y`, `z` kept for conversion.
///
/// For a leaf, `u(τ)` / `v(τ)` are the long bases `Ū_τ`, `V̄_τ`; for other
/// non-root nodes they are short transfers with `Ū_τ = diag(Ū_α, Ū_β) u(τ)`.
/// `b(α)` couples `α` to its sibling: `A(I_α, I_β) ≈ Ū_α b(α) V̄_β^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HbsMatrix {
    pub(crate) rep: Nested,
    pub(crate) y: Vec<Vec<f64>>,
    pub(crate) z: Vec<Vec<f64>>,
    pub(crate) sample_rank: usize,
    pub(crate) long_u: Option<Vec<DenseMatrix>>,
    pub(crate) long_v: Option<Vec<DenseMatrix>>,
}

/// HBS-ID matrix: interpolative bases with identity rows at the skeletons,
/// and couplings that are submatrices of `A` on the skeletons.
#[derive(Debug, Clone, PartialEq)]
pub struct HbsIdMatrix {
    pub(crate) rep: Nested,
    pub(crate) skel_in: Vec<Vec<usize>>,
    pub(crate) skel_out: Vec<Vec<usize>>,
}

fn level_check(tree: &IndexTree, x: &DenseMatrix, level: usize) -> Result<()> {
    check_dim(tree.size(), x.nrows())?;
    if level > tree.depth() {
        return Err(Error::LevelNotBuilt {
            requested: level,
            built: tree.depth(),
        });
    }
    Ok(())
}

macro_rules! nested_api {
    ($t:ty) => {
        impl $t {
            pub fn tree(&self) -> &IndexTree {
                &self.rep.tree
            }

            pub fn dim(&self) -> usize {
                self.rep.tree.size()
            }

            /// Row basis of a leaf, or row transfer matrix of an inner node.
            pub fn u(&self, id: NodeId) -> &DenseMatrix {
                &self.rep.u[id]
            }

            /// Column basis of a leaf, or column transfer matrix of an inner node.
            pub fn v(&self, id: NodeId) -> &DenseMatrix {
                &self.rep.v[id]
            }

            /// Coupling from `id` to its sibling.
            pub fn b(&self, id: NodeId) -> &DenseMatrix {
                &self.rep.b[id]
            }

            pub fn diagonal(&self, id: NodeId) -> &DenseMatrix {
                &self.rep.d[id]
            }

            pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
                check_dim(self.dim(), x.nrows())?;
                Ok(self.rep.full(x, false))
            }

            pub fn apply_adjoint(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
                check_dim(self.dim(), x.nrows())?;
                Ok(self.rep.full(x, true))
            }

            /// Applies `A^(level)` or its adjoint: sibling blocks on levels
            /// `1..=level` only.
            pub fn apply_truncated(&self, level: usize, x: &DenseMatrix, adjoint: bool) -> Result<DenseMatrix> {
                level_check(&self.rep.tree, x, level)?;
                Ok(self.rep.truncated(level, x, adjoint))
            }

            pub fn max_rank(&self) -> usize {
                self.rep.max_rank()
            }
        }
    };
}

nested_api!(HbsMatrix);
nested_api!(HbsIdMatrix);

impl HbsMatrix {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tree: IndexTree,
        u: Vec<DenseMatrix>,
        v: Vec<DenseMatrix>,
        b: Vec<DenseMatrix>,
        d: Vec<DenseMatrix>,
        y: Vec<Vec<f64>>,
        z: Vec<Vec<f64>>,
        sample_rank: usize,
    ) -> Result<Self> {
        let rep = Nested { tree, u, v, b, d };
        rep.check_shapes()?;
        let count = rep.tree.node_count();
        if y.len() != count || z.len() != count {
            return Err(Error::Format("per-node arrays do not match the tree".into()));
        }
        for id in 0..count {
            let (ku, kv) = if id == 0 { (0, 0) } else { rep.ranks(id) };
            if y[id].len() != ku || z[id].len() != kv {
                return Err(Error::Format(format!("sample spectra of node {id} have the wrong length")));
            }
        }
        Ok(Self {
            rep,
            y,
            z,
            sample_rank,
            long_u: None,
            long_v: None,
        })
    }

    pub fn y(&self, id: NodeId) -> &[f64] {
        &self.y[id]
    }

    pub fn z(&self, id: NodeId) -> &[f64] {
        &self.z[id]
    }

    pub fn sample_rank(&self) -> usize {
        self.sample_rank
    }

    /// Long row basis of every non-root node, when compressed with
    /// `debug_long_bases`.
    pub fn long_u(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.long_u.as_ref().map(|l| &l[id])
    }

    pub fn long_v(&self, id: NodeId) -> Option<&DenseMatrix> {
        self.long_v.as_ref().map(|l| &l[id])
    }

    /// Bytes of floating point data, including the retained sample spectra.
    pub fn storage_bytes(&self) -> usize {
        let spectra: usize = self.y.iter().chain(&self.z).map(Vec::len).sum();
        (self.rep.scalar_count() + spectra) * std::mem::size_of::<f64>()
    }
}

impl HbsIdMatrix {
    pub fn from_parts(
        tree: IndexTree,
        u: Vec<DenseMatrix>,
        v: Vec<DenseMatrix>,
        b: Vec<DenseMatrix>,
        d: Vec<DenseMatrix>,
        skel_in: Vec<Vec<usize>>,
        skel_out: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let rep = Nested { tree, u, v, b, d };
        rep.check_shapes()?;
        let count = rep.tree.node_count();
        if skel_in.len() != count || skel_out.len() != count {
            return Err(Error::Format("per-node arrays do not match the tree".into()));
        }
        for id in 1..count {
            let (ku, kv) = rep.ranks(id);
            if skel_in[id].len() != ku || skel_out[id].len() != kv {
                return Err(Error::Format(format!("skeleton of node {id} does not match its basis")));
            }
        }
        if !skel_in[0].is_empty() || !skel_out[0].is_empty() {
            return Err(Error::Format("root has no skeleton".into()));
        }
        Ok(Self { rep, skel_in, skel_out })
    }

    /// Global row skeleton of a node, ascending.
    pub fn skeleton_in(&self, id: NodeId) -> &[usize] {
        &self.skel_in[id]
    }

    /// Global column skeleton of a node, ascending.
    pub fn skeleton_out(&self, id: NodeId) -> &[usize] {
        &self.skel_out[id]
    }

    /// Bytes of floating point data held by the representation.
    pub fn storage_bytes(&self) -> usize {
        self.rep.scalar_count() * std::mem::size_of::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodlr::hodlr_compress;
    use crate::linalg::{orthonormality_defect, scale_columns, select_rows, spectral_norm, GaussianRng};
    use crate::operator::{dense_oracle, planted::planted_hbs, CountingOracle};

    fn planted(n: usize, m: usize, r: usize, seed: u64) -> (DenseMatrix, IndexTree, HbsMatrix) {
        let a = planted_hbs(n, m, 5, seed).unwrap();
        let tree = IndexTree::build(n, m).unwrap();
        let h = hbs_compress(&dense_oracle(a.clone()).unwrap(), &tree, r, seed + 100, false).unwrap();
        (a, tree, h)
    }

    fn max_rel_error(a: &DenseMatrix, f: impl Fn(&DenseMatrix) -> DenseMatrix, seed: u64) -> f64 {
        let mut rng = GaussianRng::new(seed);
        (0..10)
            .map(|_| {
                let x = rng.block(a.ncols(), 1);
                let ax = a * &x;
                (f(&x) - &ax).norm() / ax.norm()
            })
            .fold(0.0, f64::max)
    }

    fn masked(a: &DenseMatrix, tree: &IndexTree, level: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.nrows(), a.ncols());
        for lvl in 1..=level {
            for &x in tree.nodes_on_level(lvl).unwrap() {
                let y = tree.sibling(x).unwrap();
                let (nx, ny) = (tree.node(x), tree.node(y));
                out.view_mut((nx.start, ny.start), (nx.len(), ny.len()))
                    .copy_from(&a.view((nx.start, ny.start), (nx.len(), ny.len())));
            }
        }
        out
    }

    /// Long basis of `id` rebuilt from leaf bases and transfers.
    fn telescope(bases: &[DenseMatrix], tree: &IndexTree, id: NodeId) -> DenseMatrix {
        match tree.children(id) {
            None => bases[id].clone(),
            Some([a, c]) => {
                let (la, lc) = (telescope(bases, tree, a), telescope(bases, tree, c));
                let t = &bases[id];
                let mut out = DenseMatrix::zeros(la.nrows() + lc.nrows(), t.ncols());
                out.rows_mut(0, la.nrows()).copy_from(&(&la * t.rows(0, la.ncols())));
                out.rows_mut(la.nrows(), lc.nrows()).copy_from(&(&lc * t.rows(la.ncols(), lc.ncols())));
                out
            }
        }
    }

    #[test]
    fn planted_rank_five_is_recovered() {
        let (a, tree, h) = planted(256, 32, 15, 1);
        let e = max_rel_error(&a, |x| h.apply(x).unwrap(), 2);
        assert!(e <= 1e-11, "E = {e}");
        let at = a.transpose();
        let e = max_rel_error(&at, |x| h.apply_adjoint(x).unwrap(), 3);
        assert!(e <= 1e-11, "E* = {e}");
        for id in 1..tree.node_count() {
            if tree.node(id).is_leaf() {
                assert!(orthonormality_defect(h.u(id)) < 1e-12);
                assert!(orthonormality_defect(h.v(id)) < 1e-12);
            } else {
                // projections of the parent basis: contractions, exact on the signal columns
                assert!(spectral_norm(h.u(id)) <= 1.0 + 1e-12);
                assert!(spectral_norm(h.v(id)) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn matvec_counts() {
        let a = planted_hbs(200, 24, 4, 5).unwrap();
        let tree = IndexTree::build(200, 24).unwrap();
        let op = CountingOracle::new(dense_oracle(a).unwrap());
        hbs_compress(&op, &tree, 9, 0, false).unwrap();
        let l = tree.depth() as u64;
        assert_eq!(op.matvec_count(), l * 18 + tree.max_leaf_len() as u64);
        assert_eq!(op.adjoint_count(), l * 18);
    }

    #[test]
    fn block_diagonal_gives_zero_couplings() {
        let tree = IndexTree::build(64, 16).unwrap();
        let mut a = DenseMatrix::zeros(64, 64);
        let g = GaussianRng::new(1).block(64, 16);
        for leaf in tree.leaves() {
            let nd = tree.node(leaf);
            a.view_mut((nd.start, nd.start), (16, 16)).copy_from(&g.rows(nd.start, 16));
        }
        let h = hbs_compress(&dense_oracle(a.clone()).unwrap(), &tree, 6, 2, false).unwrap();
        for id in 1..tree.node_count() {
            assert!(h.y(id).iter().all(|&s| s <= 1e-13));
            assert!(h.z(id).iter().all(|&s| s <= 1e-13));
            assert!(h.b(id).amax() <= 1e-13);
        }
        for leaf in tree.leaves() {
            let nd = tree.node(leaf);
            assert!((h.diagonal(leaf) - a.view((nd.start, nd.start), (16, 16))).amax() < 1e-13);
        }
        let id = hbs_to_hbsid(&h, 1e-10).unwrap();
        assert_eq!(id.max_rank(), 0);
        assert!((id.apply(&g.columns(0, 2).into_owned()).unwrap() - &a * g.columns(0, 2)).amax() < 1e-13);
    }

    #[test]
    fn debug_mode_is_bit_identical() {
        let a = planted_hbs(128, 16, 4, 8).unwrap();
        let tree = IndexTree::build(128, 16).unwrap();
        let op = dense_oracle(a).unwrap();
        let lean = hbs_compress(&op, &tree, 8, 3, false).unwrap();
        let full = hbs_compress(&op, &tree, 8, 3, true).unwrap();
        assert_eq!(lean.rep, full.rep);
        assert_eq!((lean.y.clone(), lean.z.clone()), (full.y.clone(), full.z.clone()));
        assert!(lean.long_u(3).is_none());
        assert!(full.long_u(3).is_some());
    }

    #[test]
    fn telescoped_bases_match_long_bases() {
        // with r equal to the planted rank every basis column carries signal
        let a = planted_hbs(256, 32, 5, 4).unwrap();
        let tree = IndexTree::build(256, 32).unwrap();
        let h = hbs_compress(&dense_oracle(a).unwrap(), &tree, 5, 9, true).unwrap();
        for id in 1..tree.node_count() {
            let rebuilt = telescope(&h.rep.u, &tree, id);
            let long = h.long_u(id).unwrap();
            assert!((&rebuilt - long).amax() < 1e-11, "node {id}");
            assert!(orthonormality_defect(&rebuilt) < 1e-11 * tree.depth() as f64);
        }

        // with oversampling the spanning matrices Ū diag(y) still agree
        let (_, tree, _) = planted(256, 32, 15, 6);
        let a = planted_hbs(256, 32, 5, 6).unwrap();
        let h = hbs_compress(&dense_oracle(a).unwrap(), &tree, 15, 106, true).unwrap();
        for id in 1..tree.node_count() {
            let rebuilt = scale_columns(&telescope(&h.rep.u, &tree, id), h.y(id));
            let long = scale_columns(h.long_u(id).unwrap(), h.y(id));
            assert!((&rebuilt - &long).amax() < 1e-11 * h.y(id)[0], "node {id}");
        }
    }

    #[test]
    fn truncated_apply_matches_masked_dense_and_hodlr() {
        let (a, tree, h) = planted(128, 16, 10, 2);
        let hodlr = hodlr_compress(&dense_oracle(a.clone()).unwrap(), &tree, 10, 1e-12, 4).unwrap();
        let x = GaussianRng::new(3).block(128, 2);
        assert_eq!(h.apply_truncated(0, &x, false).unwrap(), DenseMatrix::zeros(128, 2));
        let scale = spectral_norm(&a) * x.norm();
        for level in 1..=tree.depth() {
            let m = masked(&a, &tree, level);
            assert!((h.apply_truncated(level, &x, false).unwrap() - &m * &x).norm() < 1e-10 * scale);
            assert!((h.apply_truncated(level, &x, true).unwrap() - m.tr_mul(&x)).norm() < 1e-10 * scale);
        }
        let diff = h.apply_truncated(1, &x, false).unwrap() - hodlr.apply_truncated(1, &x, false).unwrap();
        assert!(diff.norm() < 1e-10 * scale);
        assert!(h.apply_truncated(tree.depth() + 1, &x, false).is_err());
    }

    #[test]
    fn hbsid_reveals_planted_rank() {
        let (a, tree, h) = planted(256, 32, 15, 3);
        let id = hbs_to_hbsid(&h, 1e-12).unwrap();
        for node in 1..tree.node_count() {
            assert_eq!(id.skeleton_in(node).len(), 5, "node {node}");
            assert_eq!(id.skeleton_out(node).len(), 5, "node {node}");
        }
        let e = max_rel_error(&a, |x| id.apply(x).unwrap(), 7);
        assert!(e <= 1e-10, "E = {e}");

        for node in 1..tree.node_count() {
            let sib = tree.sibling(node).unwrap();
            let dense = select_rows(&a, id.skeleton_in(node)).select_columns(id.skeleton_out(sib));
            assert!((id.b(node) - dense).amax() < 1e-9);
            let nd = tree.node(node);
            assert!(id.skeleton_in(node).iter().all(|j| nd.range().contains(j)));
            if let Some([x, y]) = tree.children(node) {
                let union: Vec<usize> = [id.skeleton_in(x), id.skeleton_in(y)].concat();
                assert!(id.skeleton_in(node).iter().all(|j| union.contains(j)));
            }
        }
    }

    #[test]
    fn storage_and_rank_reporting() {
        let (_, _, h) = planted(128, 16, 8, 1);
        assert_eq!(h.max_rank(), 8);
        let id = hbs_to_hbsid(&h, 1e-10).unwrap();
        assert!(id.max_rank() <= 8);
        assert!(id.storage_bytes() < h.storage_bytes());
    }
}
