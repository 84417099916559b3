use super::{HbsIdMatrix, HbsMatrix, Nested};
use crate::error::invalid;
use crate::linalg::{id_unchecked, scale_columns, select_rows, DenseMatrix, FactorizationMode};
use crate::tree::NodeId;
use crate::Result;

/// Interpolative basis for one side of one node.
struct Skeleton {
    /// `m x k` with identity rows at the skeleton positions.
    basis: DenseMatrix,
    /// Global indices, ascending.
    global: Vec<usize>,
    /// Rows of the candidate basis at the skeleton, `k x r`.
    samp: DenseMatrix,
}

/// IDs the rows of `basis * diag(spec)`; `candidates` are the global indices
/// those rows stand for.
fn skeletonize(basis: &DenseMatrix, spec: &[f64], candidates: &[usize], eps: f64) -> Skeleton {
    let weighted = scale_columns(basis, spec).transpose();
    let id = id_unchecked(&weighted, FactorizationMode::Tolerance(eps));
    let mut order: Vec<usize> = (0..id.rank).collect();
    order.sort_by_key(|&i| id.perm[i]);
    let local: Vec<usize> = order.iter().map(|&i| id.perm[i]).collect();
    Skeleton {
        basis: select_rows(&id.x, &order).transpose(),
        global: local.iter().map(|&j| candidates[j]).collect(),
        samp: select_rows(basis, &local),
    }
}

fn block_diag_rows(a: &DenseMatrix, b: &DenseMatrix, transfer: &DenseMatrix) -> DenseMatrix {
    // diag(a, b) * transfer, with a: ka x ra and b: kb x rb
    let (ka, ra) = a.shape();
    let kb = b.nrows();
    let mut out = DenseMatrix::zeros(ka + kb, transfer.ncols());
    out.rows_mut(0, ka).copy_from(&(a * transfer.rows(0, ra)));
    out.rows_mut(ka, kb).copy_from(&(b * transfer.rows(ra, transfer.nrows() - ra)));
    out
}

/// Converts to HBS-ID, revealing the ranks at relative tolerance `eps` by
/// interpolative decompositions of the weighted sample bases, leaves first.
pub fn hbs_to_hbsid(h: &HbsMatrix, eps: f64) -> Result<HbsIdMatrix> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("tolerance {eps} outside (0, 1)")));
    }
    let src = &h.rep;
    let tree = &src.tree;
    let count = tree.node_count();
    let mut rows: Vec<Option<Skeleton>> = (0..count).map(|_| None).collect();
    let mut cols: Vec<Option<Skeleton>> = (0..count).map(|_| None).collect();
    let empty = || vec![DenseMatrix::zeros(0, 0); count];
    let mut b = empty();

    for level in (1..=tree.depth()).rev() {
        let ids: Vec<NodeId> = tree.nodes_on_level(level)?.to_vec();
        for &tau in &ids {
            for (side, src_basis, spec) in [(&mut rows, &src.u, &h.y), (&mut cols, &src.v, &h.z)] {
                let (basis, candidates) = match tree.children(tau) {
                    None => (src_basis[tau].clone(), tree.node(tau).range().collect::<Vec<_>>()),
                    Some([a, c]) => {
                        let (sa, sc) = (side[a].as_ref().expect("child"), side[c].as_ref().expect("child"));
                        let stacked = block_diag_rows(&sa.samp, &sc.samp, &src_basis[tau]);
                        (stacked, [sa.global.as_slice(), sc.global.as_slice()].concat())
                    }
                };
                side[tau] = Some(skeletonize(&basis, &spec[tau], &candidates, eps));
            }
        }
        for &a in &ids {
            let c = tree.sibling(a).expect("non-root");
            let (ra, vc) = (rows[a].as_ref().expect("row skeleton"), cols[c].as_ref().expect("column skeleton"));
            b[a] = &ra.samp * &src.b[a] * vc.samp.transpose();
        }
    }

    let mut u = empty();
    let mut v = empty();
    let mut skel_in = vec![Vec::new(); count];
    let mut skel_out = vec![Vec::new(); count];
    for id in 1..count {
        let r = rows[id].take().expect("row skeleton");
        let c = cols[id].take().expect("column skeleton");
        u[id] = r.basis;
        v[id] = c.basis;
        skel_in[id] = r.global;
        skel_out[id] = c.global;
    }
    Ok(HbsIdMatrix {
        rep: Nested {
            tree: tree.clone(),
            u,
            v,
            b,
            d: src.d.clone(),
        },
        skel_in,
        skel_out,
    })
}
