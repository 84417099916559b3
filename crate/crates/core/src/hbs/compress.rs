use super::nested::{nested_apply, Side};
use super::{HbsMatrix, Nested};
use crate::error::check_dim;
use crate::linalg::{hstack, scale_columns, svd_unchecked, vstack, DenseMatrix, FactorizationMode, GaussianRng};
use crate::operator::LinearOracle;
use crate::sampling::{basis_probe, check_sample_width, child_sample, leaf_blocks, leaf_probe, sibling_probe};
use crate::tree::{IndexTree, NodeId};
use crate::Result;

/// Sample singular values below this fraction of the largest are zeroed.
const SPECTRUM_FLOOR: f64 = 1e-14;

fn clean(mut s: Vec<f64>) -> Vec<f64> {
    let top = s.first().copied().unwrap_or(0.0);
    for v in &mut s {
        if *v < SPECTRUM_FLOOR * top {
            *v = 0.0;
        }
    }
    s
}

/// `[sample, Ū_τ(J_child, :) diag(y_τ)]`, or just `sample` at the root.
fn local_sample(tree: &IndexTree, sample: DenseMatrix, tau: NodeId, child: NodeId, long: &DenseMatrix, spec: &[f64]) -> DenseMatrix {
    if tau == tree.root() {
        return sample;
    }
    let rel = tree.relative_range(child).expect("non-root");
    let parent = scale_columns(&long.rows(rel.start, rel.len()).into_owned(), spec);
    hstack(&sample, &parent)
}

/// `[Ū_α^T Ū_τ(J_α, :); Ū_β^T Ū_τ(J_β, :)]`.
fn transfer(tree: &IndexTree, tau: NodeId, long: &DenseMatrix, ua: &DenseMatrix, ub: &DenseMatrix) -> DenseMatrix {
    let [a, b] = tree.children(tau).expect("parent node");
    let ra = tree.relative_range(a).expect("child");
    let rb = tree.relative_range(b).expect("child");
    vstack(&ua.tr_mul(&long.rows(ra.start, ra.len())), &ub.tr_mul(&long.rows(rb.start, rb.len())))
}

/// Storage-efficient randomized HBS compression with fixed sample rank `r`
/// (clipped to node sizes).
///
/// Long bases exist only for the level being processed and are replaced by
/// short transfers once the next level is built, unless `debug_long_bases`
/// asks to keep all of them. Uses exactly `L * 2r + max_leaf` columns of `A`
/// and `L * 2r` columns of `A^*`.
pub fn hbs_compress(
    oracle: &(impl LinearOracle + ?Sized),
    tree: &IndexTree,
    r: usize,
    seed: u64,
    debug_long_bases: bool,
) -> Result<HbsMatrix> {
    check_dim(tree.size(), oracle.dim())?;
    check_sample_width(r)?;
    let count = tree.node_count();
    let empty = || vec![DenseMatrix::zeros(0, 0); count];
    let (mut u, mut v, mut b) = (empty(), empty(), empty());
    let mut y: Vec<Vec<f64>> = vec![Vec::new(); count];
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); count];
    let mut long_u = debug_long_bases.then(empty);
    let mut long_v = debug_long_bases.then(empty);
    let mut rng = GaussianRng::new(seed);

    for level in 1..=tree.depth() {
        let prev = level - 1;
        let parents: Vec<NodeId> = tree.parents_on_level(prev).collect();

        let omega = sibling_probe(tree, &parents, r, &mut rng);
        let coarse = nested_apply(
            tree,
            Side { bases: &v, frontier: prev },
            Side { bases: &u, frontier: prev },
            &b,
            prev,
            &omega,
            false,
        );
        let samples = oracle.apply(&omega)? - coarse;

        let mut fresh: Vec<(NodeId, DenseMatrix, Vec<f64>)> = Vec::new();
        let mut shorts: Vec<(NodeId, DenseMatrix)> = Vec::new();
        for &tau in &parents {
            let [a, c] = tree.children(tau).expect("parent node");
            let mut new = Vec::with_capacity(2);
            for (child, sib, offset) in [(a, c, r), (c, a, 0)] {
                let sample = child_sample(tree, &samples, child, offset, r.min(tree.node(sib).len()));
                let loc = local_sample(tree, sample, tau, child, &u[tau], &y[tau]);
                let k = r.min(loc.nrows()).min(loc.ncols());
                let f = svd_unchecked(&loc, FactorizationMode::FixedRank(k))?;
                new.push(f.u.clone());
                fresh.push((child, f.u, clean(f.s)));
            }
            if tau != tree.root() {
                shorts.push((tau, transfer(tree, tau, &u[tau], &new[0], &new[1])));
            }
        }
        for (id, basis, spec) in fresh {
            if let Some(l) = long_u.as_mut() {
                l[id] = basis.clone();
            }
            u[id] = basis;
            y[id] = spec;
        }
        for (id, t) in shorts {
            u[id] = t;
        }

        let omega = basis_probe(tree, &parents, r, |id| &u[id]);
        let coarse = nested_apply(
            tree,
            Side { bases: &u, frontier: level },
            Side { bases: &v, frontier: prev },
            &b,
            prev,
            &omega,
            true,
        );
        let samples = oracle.apply_adjoint(&omega)? - coarse;

        let mut fresh: Vec<(NodeId, DenseMatrix, Vec<f64>)> = Vec::new();
        let mut shorts: Vec<(NodeId, DenseMatrix)> = Vec::new();
        for &tau in &parents {
            let [a, c] = tree.children(tau).expect("parent node");
            let mut new = Vec::with_capacity(2);
            for (child, sib, offset) in [(a, c, r), (c, a, 0)] {
                // samples of A(I_sib, I_child)^T Ū_sib
                let width = u[sib].ncols();
                let sample = child_sample(tree, &samples, child, offset, width);
                let loc = local_sample(tree, sample, tau, child, &v[tau], &z[tau]);
                let k = r.min(loc.nrows()).min(loc.ncols());
                let f = svd_unchecked(&loc, FactorizationMode::FixedRank(k))?;
                b[sib] = scale_columns(&f.v.rows(0, width).into_owned(), &f.s);
                new.push(f.u.clone());
                fresh.push((child, f.u, clean(f.s)));
            }
            if tau != tree.root() {
                shorts.push((tau, transfer(tree, tau, &v[tau], &new[0], &new[1])));
            }
        }
        for (id, basis, spec) in fresh {
            if let Some(l) = long_v.as_mut() {
                l[id] = basis.clone();
            }
            v[id] = basis;
            z[id] = spec;
        }
        for (id, t) in shorts {
            v[id] = t;
        }
    }

    let depth = tree.depth();
    let omega = leaf_probe(tree);
    let coarse = nested_apply(
        tree,
        Side { bases: &v, frontier: depth },
        Side { bases: &u, frontier: depth },
        &b,
        depth,
        &omega,
        false,
    );
    let d = leaf_blocks(tree, &(oracle.apply(&omega)? - coarse));

    Ok(HbsMatrix {
        rep: Nested {
            tree: tree.clone(),
            u,
            v,
            b,
            d,
        },
        y,
        z,
        sample_rank: r,
        long_u,
        long_v,
    })
}
