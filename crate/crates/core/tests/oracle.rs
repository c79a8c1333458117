use greedyperm::generate::uniform;
use greedyperm::verify::{greedy_factor, verify_permutation};
use greedyperm::{clarkson, gonzalez, FvdConfig, Norm, PointId, Space};
use proptest::prelude::*;

fn norm(i: u8) -> Norm {
    [Norm::L1, Norm::L2, Norm::Linf][i as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_clarkson_matches_gonzalez(n in 1usize..120, dim in 1usize..6, nm in 0u8..3, seed in any::<u64>(), st in any::<usize>()) {
        let s: Space = uniform(dim, n, seed, norm(nm)).unwrap();
        let start = PointId((st % n) as u32);
        let (g, _) = gonzalez(&s, start).unwrap();
        let (c, _, _) = clarkson(&s, start, &FvdConfig::EXACT).unwrap();
        prop_assert_eq!(g.to_text(), c.to_text());
        prop_assert!(greedy_factor(&s, &g) <= 1.0 + 1e-12);
    }

    #[test]
    fn default_clarkson_meets_its_claim(n in 2usize..150, seed in any::<u64>()) {
        let s: Space = uniform(2, n, seed, Norm::L2).unwrap();
        let (p, t, _) = clarkson(&s, PointId(0), &FvdConfig::default()).unwrap();
        let r = verify_permutation(&s, &p, p.factor_claim);
        prop_assert!(r.iter().all(|x| x.passed()), "{:?}", r);
        prop_assert_eq!(t.len(), n);
    }
}

#[test]
fn integer_grid_ties_match() {
    // many equal distances
    let rows: Vec<[f64; 2]> = (0..49).map(|i| [(i % 7) as f64, (i / 7) as f64]).collect();
    for norm in [Norm::L1, Norm::L2, Norm::Linf] {
        let s = Space::from_rows(&rows, norm).unwrap();
        for start in [0, 24, 48] {
            let (g, _) = gonzalez(&s, PointId(start)).unwrap();
            let (c, _, _) = clarkson(&s, PointId(start), &FvdConfig::EXACT).unwrap();
            assert_eq!(g.to_text(), c.to_text(), "{norm} start {start}");
        }
    }
}

#[test]
fn f32_runs() {
    let s: greedyperm::Space32 = uniform(3, 80, 5, Norm::L2).unwrap();
    let (g, _) = gonzalez(&s, PointId(0)).unwrap();
    let (c, _, _) = clarkson(&s, PointId(0), &FvdConfig::EXACT).unwrap();
    assert_eq!(g.to_text(), c.to_text());
}
