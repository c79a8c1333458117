use greedyperm::algorithms::bb_tree_params;
use greedyperm::generate::uniform;
use greedyperm::verify::{
    all_passed, greedy_factor, verify_covering, verify_strong_packing, verify_tree,
};
use greedyperm::{
    clarkson_bb, gonzalez, gt_build, gt_merge, gt_refine, BbOptions, FvdConfig, NoObserver, Norm,
    PointId, Space, Tree,
};
use proptest::prelude::*;

fn subset(s: &Space, lo: usize, hi: usize) -> Tree {
    // exact tree on the index range, rooted at lo
    let rows: Vec<Vec<f64>> = (lo..hi)
        .map(|i| s.point(PointId(i as u32)).to_vec())
        .collect();
    let sub = Space::from_rows(&rows, s.norm()).unwrap();
    let (p, _) = gonzalez(&sub, PointId(0)).unwrap();
    let mut t = Tree::leaf(PointId(lo as u32), greedyperm::TreeParams::EXACT);
    for e in &p.entries[1..] {
        t.attach(
            PointId(e.pred.unwrap().0 + lo as u32),
            PointId(e.point.0 + lo as u32),
            e.eps,
        )
        .unwrap();
    }
    t.finish();
    t
}

fn check_tree(s: &Space, t: &Tree, cfg: &FvdConfig) {
    let r = verify_tree(s, t, bb_tree_params(cfg));
    assert!(all_passed(&r), "{r:?}");
    let sp = verify_strong_packing(s, t, cfg.strong_packing());
    assert!(sp.passed(), "{sp}");
    let cov = verify_covering(s, t, cfg.heap_approx);
    assert!(cov.passed(), "{cov}");
}

#[test]
fn bb_merge_build_trees_are_valid() {
    let cfg = FvdConfig::default();
    for (i, n) in [2usize, 3, 17, 200, 700].into_iter().enumerate() {
        let s: Space = uniform(2, n, 100 + i as u64, Norm::L2).unwrap();
        let (_, t, _) =
            clarkson_bb(&s, PointId(0), &cfg, &BbOptions::default(), &mut NoObserver).unwrap();
        check_tree(&s, &t, &cfg);
        let (t, _) = gt_build(&s, &cfg, false).unwrap();
        check_tree(&s, &t, &cfg);
    }
}

#[test]
fn merge_of_exact_halves_is_valid() {
    let cfg = FvdConfig::default();
    let s: Space = uniform(2, 1000, 9, Norm::L2).unwrap();
    let a = subset(&s, 0, 500);
    let b = subset(&s, 500, 1000);
    let (m, _) = gt_merge(&s, &a, &b, &cfg, &BbOptions::default(), &mut NoObserver).unwrap();
    check_tree(&s, &m, &cfg);
}

#[test]
fn merge_of_two_point_trees() {
    let s = Space::line(&[0.0, 1.0, 3.0, 7.0], Norm::L2);
    let cfg = FvdConfig::default();
    let a = subset(&s, 0, 2);
    let b = subset(&s, 2, 4);
    let (m, _) = gt_merge(&s, &a, &b, &cfg, &BbOptions::default(), &mut NoObserver).unwrap();
    assert_eq!(m.len(), 4);
    check_tree(&s, &m, &cfg);
}

#[test]
fn refine_reaches_one_plus_one_over_n() {
    let s: Space = uniform(2, 1000, 4, Norm::L2).unwrap();
    let (_, t, _) = clarkson_bb(
        &s,
        PointId(0),
        &FvdConfig::default(),
        &BbOptions::default(),
        &mut NoObserver,
    )
    .unwrap();
    let (p, _, _) = gt_refine(&s, &t).unwrap();
    assert!(greedy_factor(&s, &p) <= 1.001 + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn build_then_refine(n in 1usize..300, dim in 1usize..4, seed in any::<u64>()) {
        let s: Space = uniform(dim, n, seed, Norm::L2).unwrap();
        let cfg = FvdConfig::default();
        let (t, _) = gt_build(&s, &cfg, false).unwrap();
        let r = verify_tree(&s, &t, bb_tree_params(&cfg));
        prop_assert!(all_passed(&r), "{:?}", r);
        let (p, rt, _) = gt_refine(&s, &t).unwrap();
        p.validate(n).unwrap();
        prop_assert!(greedy_factor(&s, &p) <= 1.0 + 1.0 / n as f64 + 1e-9);
        prop_assert_eq!(rt.heap_order_traversal().len(), n);
    }

    #[test]
    fn backburner_order_does_not_change_the_tree(n in 2usize..200, seed in any::<u64>(), st in any::<usize>()) {
        let base: Space = uniform(1, n, seed, Norm::L2).unwrap();
        // spread out the line geometrically so cells hit the backburner
        let xs: Vec<f64> = (0..n).map(|i| base.point(PointId(i as u32))[0] * 4f64.powi((i % 40) as i32)).collect();
        let s = Space::line(&xs, Norm::L2);
        let cfg = FvdConfig::default();
        let start = PointId((st % n) as u32);
        let fifo = BbOptions::default();
        let lifo = BbOptions { backburner: greedyperm::BackburnerOrder::Lifo, ..fifo };
        let (_, a, _) = clarkson_bb(&s, start, &cfg, &fifo, &mut NoObserver).unwrap();
        let (_, b, _) = clarkson_bb(&s, start, &cfg, &lifo, &mut NoObserver).unwrap();
        for p in 0..n as u32 {
            prop_assert_eq!(a.pred(PointId(p)), b.pred(PointId(p)));
        }
    }
}
