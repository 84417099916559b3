use hsketch::io::{from_bytes, to_bytes};
use hsketch::linalg::{
    gaussian_block, id_decompose, orthonormality_defect, qr, randomized_range, scale_columns, svd, DenseMatrix,
    FactorizationMode,
};
use hsketch::operator::dense_oracle;
use hsketch::operator::planted::planted_hbs;
use hsketch::tree::IndexTree;
use hsketch::{compress, CompressParams, Format};
use proptest::prelude::*;

fn low_rank(m: usize, n: usize, k: usize, seed: u64) -> DenseMatrix {
    gaussian_block(m, k, seed) * gaussian_block(n, k, seed + 1).transpose()
}

fn format() -> impl Strategy<Value = Format> {
    prop_oneof![Just(Format::Hodlr), Just(Format::Hbs), Just(Format::HbsId)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_partitions_the_index_set(n in 1usize..3000, m in 1usize..200) {
        let t = IndexTree::build(n, m).unwrap();
        let mut covered: Vec<(usize, usize)> = t.leaves().iter().map(|&l| (t.node(l).start, t.node(l).end)).collect();
        covered.sort();
        prop_assert_eq!(covered[0].0, 0);
        prop_assert_eq!(covered.last().unwrap().1, n);
        for w in covered.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        for id in 0..t.node_count() {
            let nd = t.node(id);
            prop_assert_eq!(nd.is_leaf(), nd.len() <= m);
            if let Some([a, b]) = t.children(id) {
                prop_assert_eq!(t.node(a).start, nd.start);
                prop_assert_eq!(t.node(a).end, t.node(b).start);
                prop_assert_eq!(t.node(b).end, nd.end);
                prop_assert_eq!(t.node(a).len(), nd.len().div_ceil(2));
                prop_assert_eq!(t.sibling(a), Some(b));
            }
        }
        let mut depth = 0;
        while n.div_ceil(1 << depth) > m {
            depth += 1;
        }
        prop_assert_eq!(t.depth(), depth);
    }

    #[test]
    fn qr_reconstructs_permuted_input(m in 2usize..40, n in 2usize..40, seed in any::<u64>()) {
        let a = gaussian_block(m, n, seed);
        let f = qr(&a, FactorizationMode::Full).unwrap();
        prop_assert!(orthonormality_defect(&f.q) <= 1e-13);
        let err = (&f.q * &f.r - a.select_columns(&f.perm)).amax();
        prop_assert!(err <= 1e-12 * a.amax().max(1.0));
        for j in 0..f.r.ncols() {
            for i in (j + 1)..f.r.nrows() {
                prop_assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn svd_reconstructs_and_orders(m in 1usize..40, n in 1usize..40, seed in any::<u64>()) {
        let a = gaussian_block(m, n, seed);
        let s = svd(&a, FactorizationMode::Full).unwrap();
        prop_assert!(s.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.s.iter().all(|&x| x >= 0.0));
        prop_assert!(orthonormality_defect(&s.u) <= 1e-12 && orthonormality_defect(&s.v) <= 1e-12);
        prop_assert!((s.reconstruct() - &a).amax() <= 1e-12 * s.s[0].max(1.0));
    }

    #[test]
    fn id_reproduces_low_rank_input(m in 4usize..40, n in 4usize..40, k in 1usize..4, seed in any::<u64>()) {
        let a = low_rank(m, n, k, seed);
        let id = id_decompose(&a, FactorizationMode::Tolerance(1e-12)).unwrap();
        prop_assert_eq!(id.rank, k);
        let approx = a.select_columns(id.skeleton()) * &id.x;
        prop_assert!((approx - &a).amax() <= 1e-9 * a.amax());
        for (i, &j) in id.skeleton().iter().enumerate() {
            for r in 0..id.rank {
                prop_assert_eq!(id.x[(r, j)], if r == i { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn range_finder_is_orthonormal_and_captures_rank(n in 20usize..120, k in 1usize..8, p in 0usize..8, seed in any::<u64>()) {
        let a = low_rank(n, n, k, seed);
        let q = randomized_range(|w| Ok(&a * w), n, k, p, seed ^ 0xabc).unwrap();
        prop_assert!(q.ncols() <= k + p);
        prop_assert!(orthonormality_defect(&q) <= 1e-12);
        let resid = &a - &q * (q.transpose() * &a);
        prop_assert!(resid.norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn serialization_round_trips(n in 40usize..300, leaf in 8usize..40, f in format(), seed in 0u64..1000) {
        let a = planted_hbs(n, leaf, 3, seed).unwrap();
        let tree = IndexTree::build(n, leaf).unwrap();
        let params = CompressParams { sample_width: 8.min(leaf), eps: 1e-10, seed };
        let c = compress(&dense_oracle(a).unwrap(), &tree, f, params).unwrap();
        let bytes = to_bytes(&c);
        let back = from_bytes(&bytes).unwrap();
        prop_assert_eq!(to_bytes(&back), bytes);
        let x = gaussian_block(n, 2, seed);
        prop_assert_eq!(back.apply(&x).unwrap(), c.apply(&x).unwrap());
        let mut cut = to_bytes(&c);
        cut.truncate(cut.len() - 1);
        prop_assert!(from_bytes(&cut).is_err());
    }

    #[test]
    fn compressed_apply_is_linear(f in format(), alpha in -3.0f64..3.0, seed in 0u64..1000) {
        let n = 160;
        let a = planted_hbs(n, 20, 3, seed).unwrap();
        let tree = IndexTree::build(n, 20).unwrap();
        let params = CompressParams { sample_width: 8, eps: 1e-10, seed };
        let c = compress(&dense_oracle(a).unwrap(), &tree, f, params).unwrap();
        let x = gaussian_block(n, 1, seed + 1);
        let y = gaussian_block(n, 1, seed + 2);
        let lhs = c.apply(&(&x * alpha + &y)).unwrap();
        let rhs = c.apply(&x).unwrap() * alpha + c.apply(&y).unwrap();
        let scale = lhs.norm().max(1.0);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * scale);
        let both = c.apply(&scale_columns(&hsketch::linalg::hstack(&x, &y), &[alpha, 1.0])).unwrap();
        prop_assert!((both.column(0) + both.column(1) - lhs).norm() <= 1e-12 * scale);
    }
}
