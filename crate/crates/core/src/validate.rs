//! Structural checks on compressed matrices.

use std::fmt;

use crate::compressed::{Compressed, Format};
use crate::hbs::{HbsIdMatrix, HbsMatrix};
use crate::hodlr::HodlrMatrix;
use crate::linalg::{orthonormality_defect, spectral_norm, DenseMatrix};
use crate::tree::{IndexTree, NodeId};

/// Allowed entrywise departure of `Q^T Q` from the identity.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured violation (0 when the check is exact).
    pub defect: f64,
    /// First offending node, if any.
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub format: Format,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "format {}", self.format)?;
        for c in &self.checks {
            write!(f, "{:<4} {:<28} defect {:.3e}", if c.passed { "ok" } else { "FAIL" }, c.name, c.defect)?;
            if let (false, Some(id)) = (c.passed, c.node) {
                write!(f, " (node {id})")?;
            }
            writeln!(f)?;
        }
        write!(f, "{}", if self.passed() { "valid" } else { "invalid" })
    }
}

/// Accumulates the worst defect over nodes against a threshold.
struct Tally {
    name: &'static str,
    limit: f64,
    defect: f64,
    node: Option<NodeId>,
}

impl Tally {
    fn new(name: &'static str, limit: f64) -> Self {
        Self {
            name,
            limit,
            defect: 0.0,
            node: None,
        }
    }

    fn record(&mut self, id: NodeId, defect: f64) {
        let bad = !(defect <= self.limit);
        if bad && self.node.is_none() {
            self.node = Some(id);
        }
        if defect > self.defect || defect.is_nan() {
            self.defect = defect;
        }
    }

    fn finish(self) -> Check {
        Check {
            name: self.name,
            passed: self.node.is_none(),
            defect: self.defect,
            node: self.node,
        }
    }
}

fn non_finite(m: &DenseMatrix) -> bool {
    m.iter().any(|x| !x.is_finite())
}

fn finite_check<'a>(count: usize, parts: impl Fn(NodeId) -> Vec<&'a DenseMatrix>, vecs: impl Fn(NodeId) -> Vec<&'a [f64]>) -> Check {
    let mut t = Tally::new("finite entries", 0.0);
    for id in 0..count {
        let bad = parts(id).into_iter().any(non_finite) || vecs(id).into_iter().flatten().any(|x| !x.is_finite());
        t.record(id, if bad { 1.0 } else { 0.0 });
    }
    t.finish()
}

/// Larger of `max(0, -min s)` and the largest increase between neighbours.
fn spectrum_defect(s: &[f64]) -> f64 {
    let neg = s.iter().fold(0.0f64, |m, &x| m.max(-x));
    let rise = s.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    if s.iter().any(|x| x.is_nan()) {
        f64::NAN
    } else {
        neg.max(rise)
    }
}

pub fn validate(c: &Compressed) -> ValidationReport {
    let checks = match c {
        Compressed::Hodlr(h) => hodlr_checks(h),
        Compressed::Hbs(h) => hbs_checks(h),
        Compressed::HbsId(h) => hbsid_checks(h),
    };
    ValidationReport {
        format: c.format(),
        checks,
    }
}

fn hodlr_checks(h: &HodlrMatrix) -> Vec<Check> {
    let count = h.tree().node_count();
    let mut u = Tally::new("orthonormal U", ORTHONORMALITY_TOL);
    let mut v = Tally::new("orthonormal V", ORTHONORMALITY_TOL);
    let mut s = Tally::new("B nonnegative, nonincreasing", 0.0);
    for id in 1..count {
        u.record(id, orthonormality_defect(h.u(id)));
        v.record(id, orthonormality_defect(h.v(id)));
        s.record(id, spectrum_defect(h.s(id)));
    }
    vec![
        finite_check(count, |id| vec![h.u(id), h.v(id), h.diagonal(id)], |id| vec![h.s(id)]),
        u.finish(),
        v.finish(),
        s.finish(),
    ]
}

fn hbs_checks(h: &HbsMatrix) -> Vec<Check> {
    let tree = h.tree();
    let count = tree.node_count();
    let mut lu = Tally::new("orthonormal leaf U", ORTHONORMALITY_TOL);
    let mut lv = Tally::new("orthonormal leaf V", ORTHONORMALITY_TOL);
    let mut tu = Tally::new("contractive transfer U", ORTHONORMALITY_TOL);
    let mut tv = Tally::new("contractive transfer V", ORTHONORMALITY_TOL);
    let mut spec = Tally::new("spectra nonincreasing", 0.0);
    for id in 1..count {
        if tree.node(id).is_leaf() {
            lu.record(id, orthonormality_defect(h.u(id)));
            lv.record(id, orthonormality_defect(h.v(id)));
        } else {
            tu.record(id, (spectral_norm(h.u(id)) - 1.0).max(0.0));
            tv.record(id, (spectral_norm(h.v(id)) - 1.0).max(0.0));
        }
        spec.record(id, spectrum_defect(h.y(id)).max(spectrum_defect(h.z(id))));
    }
    vec![
        finite_check(count, |id| vec![h.u(id), h.v(id), h.b(id), h.diagonal(id)], |id| vec![h.y(id), h.z(id)]),
        lu.finish(),
        lv.finish(),
        tu.finish(),
        tv.finish(),
        spec.finish(),
    ]
}

/// Local row position of each skeleton index inside the rows of the basis:
/// offsets into `I_τ` at a leaf, positions in the children's concatenated
/// skeletons otherwise. `None` when an index is not a candidate.
fn local_positions(tree: &IndexTree, id: NodeId, skel: &[usize], child_skel: impl Fn(NodeId) -> Vec<usize>) -> Option<Vec<usize>> {
    let candidates: Vec<usize> = match tree.children(id) {
        None => tree.node(id).range().collect(),
        Some([a, c]) => [child_skel(a), child_skel(c)].concat(),
    };
    skel.iter().map(|g| candidates.iter().position(|x| x == g)).collect()
}

fn identity_defect(basis: &DenseMatrix, pos: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &p) in pos.iter().enumerate() {
        for j in 0..basis.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = basis[(p, j)];
            if got != want {
                worst = worst.max((got - want).abs()).max(f64::MIN_POSITIVE);
            }
        }
    }
    worst
}

fn hbsid_checks(h: &HbsIdMatrix) -> Vec<Check> {
    let tree = h.tree();
    let count = tree.node_count();
    let mut inside = Tally::new("skeleton inside I_tau", 0.0);
    let mut sorted = Tally::new("skeleton sorted", 0.0);
    let mut nested = Tally::new("skeleton nested", 0.0);
    let mut ident = Tally::new("identity rows exact", 0.0);
    for id in 1..count {
        let nd = tree.node(id);
        for rows in [true, false] {
            let skel = |n: NodeId| if rows { h.skeleton_in(n) } else { h.skeleton_out(n) };
            let basis = if rows { h.u(id) } else { h.v(id) };
            let s = skel(id);
            inside.record(id, if s.iter().all(|j| nd.range().contains(j)) { 0.0 } else { 1.0 });
            sorted.record(id, if s.windows(2).all(|w| w[0] < w[1]) { 0.0 } else { 1.0 });
            match local_positions(tree, id, s, |c| skel(c).to_vec()) {
                Some(pos) => {
                    nested.record(id, 0.0);
                    ident.record(id, identity_defect(basis, &pos));
                }
                None => {
                    nested.record(id, 1.0);
                    ident.record(id, f64::NAN);
                }
            }
        }
    }
    vec![
        finite_check(count, |id| vec![h.u(id), h.v(id), h.b(id), h.diagonal(id)], |_| Vec::new()),
        inside.finish(),
        sorted.finish(),
        nested.finish(),
        ident.finish(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressed::{compress, CompressParams};
    use crate::io::{from_bytes, to_bytes};
    use crate::operator::{dense_oracle, planted::planted_hbs};

    fn sample(format: Format) -> Compressed {
        let a = planted_hbs(128, 16, 4, 1).unwrap();
        let tree = IndexTree::build(128, 16).unwrap();
        let p = CompressParams {
            sample_width: 10,
            eps: 1e-10,
            seed: 5,
        };
        compress(&dense_oracle(a).unwrap(), &tree, format, p).unwrap()
    }

    #[test]
    fn fresh_compressions_pass() {
        for f in Format::ALL {
            let r = validate(&sample(f));
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn perturbed_basis_fails_orthonormality() {
        let c = sample(Format::Hodlr);
        let mut bytes = to_bytes(&c);
        // first entry of u[1]: header 24, root u/s/v/d headers, then u[1] dims
        let at = 24 + 16 + 8 + 16 + 16 + 16;
        bytes[at + 6] ^= 0x10;
        let r = validate(&from_bytes(&bytes).unwrap());
        assert!(!r.passed());
        let bad: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(bad, vec!["orthonormal U"]);
    }

    #[test]
    fn spectrum_defects() {
        assert_eq!(spectrum_defect(&[3.0, 2.0, 2.0, 0.0]), 0.0);
        assert_eq!(spectrum_defect(&[1.0, 1.5]), 0.5);
        assert_eq!(spectrum_defect(&[1.0, -0.25]), 0.25);
        assert!(spectrum_defect(&[f64::NAN]).is_nan());
    }

    #[test]
    fn broken_identity_row_is_reported() {
        let Compressed::HbsId(h) = sample(Format::HbsId) else { unreachable!() };
        let tree = h.tree().clone();
        let leaf = tree.leaves()[0];
        let pos = h.skeleton_in(leaf)[0] - tree.node(leaf).start;
        let mut u: Vec<DenseMatrix> = (0..tree.node_count()).map(|i| h.u(i).clone()).collect();
        u[leaf][(pos, 0)] = 1.0 + f64::EPSILON;
        let broken = HbsIdMatrix::from_parts(
            tree.clone(),
            u,
            (0..tree.node_count()).map(|i| h.v(i).clone()).collect(),
            (0..tree.node_count()).map(|i| h.b(i).clone()).collect(),
            (0..tree.node_count()).map(|i| h.diagonal(i).clone()).collect(),
            (0..tree.node_count()).map(|i| h.skeleton_in(i).to_vec()).collect(),
            (0..tree.node_count()).map(|i| h.skeleton_out(i).to_vec()).collect(),
        )
        .unwrap();
        let r = validate(&Compressed::HbsId(broken));
        let c = r.checks.iter().find(|c| c.name == "identity rows exact").unwrap();
        assert!(!c.passed);
        assert_eq!(c.node, Some(leaf));
    }
}
