mod common;

use common::{all_points, brute_dnns_points, random_map};
use dfm::dnns::{dnns, dnns_maps, DescriptorView, RatioThreshold};
use dfm::{FeatureMap, GridMatch};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle(a: &FeatureMap, b: &FeatureMap, r: f64) -> Vec<GridMatch> {
    let mut m = brute_dnns_points(a, &all_points(a), b, &all_points(b), r);
    m.sort();
    m
}

fn ratio(r: f64) -> RatioThreshold {
    RatioThreshold::new(r).unwrap()
}

#[test]
fn seeded_8x8_grids_match_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 3, 16, 8, 8);
        let b = random_map(&mut rng, 3, 16, 8, 8);
        let got = dnns_maps(&a, &b, ratio(0.8)).unwrap();
        assert_eq!(got.matches(), oracle(&a, &b, 0.8).as_slice(), "seed {seed}");
    }
}

#[test]
fn tiled_parallel_search_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = random_map(&mut rng, 2, 12, 37, 41);
    let b = random_map(&mut rng, 2, 12, 29, 53);
    for r in [0.7, 1.0] {
        let got = dnns_maps(&a, &b, ratio(r)).unwrap();
        assert_eq!(got.matches(), oracle(&a, &b, r).as_slice());
    }
}

#[test]
fn self_match_is_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_map(&mut rng, 4, 8, 12, 12);
    let set = dnns_maps(&a, &a, RatioThreshold::DISABLED).unwrap();
    assert!(!set.is_empty());
    assert!(set.iter().all(|m| m.a == m.b));
}

fn grid_pair() -> impl Strategy<Value = (u64, usize, usize, usize, usize, usize)> {
    (any::<u64>(), 1usize..10, 1usize..10, 1usize..10, 1usize..10, 2usize..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_under_swap((seed, ra, ca, rb, cb, ch) in grid_pair(), r in 0.3f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 2, ch, ra, ca);
        let b = random_map(&mut rng, 2, ch, rb, cb);
        let ab = dnns_maps(&a, &b, ratio(r)).unwrap();
        let ba = dnns_maps(&b, &a, ratio(r)).unwrap();
        prop_assert_eq!(ab, ba.swapped());
    }

    #[test]
    fn ratio_monotone((seed, ra, ca, rb, cb, ch) in grid_pair(), r1 in 0.1f64..=1.0, r2 in 0.1f64..=1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 1, ch, ra, ca);
        let b = random_map(&mut rng, 1, ch, rb, cb);
        let small = dnns_maps(&a, &b, ratio(lo)).unwrap();
        let large = dnns_maps(&a, &b, ratio(hi)).unwrap();
        prop_assert!(small.iter().all(|m| large.contains(m)));
    }

    #[test]
    fn partial_injection((seed, ra, ca, rb, cb, ch) in grid_pair()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 1, ch, ra, ca);
        let b = random_map(&mut rng, 1, ch, rb, cb);
        let set = dnns_maps(&a, &b, RatioThreshold::DISABLED).unwrap();
        let mut pa: Vec<_> = set.iter().map(|m| m.a).collect();
        let mut pb: Vec<_> = set.iter().map(|m| m.b).collect();
        pa.dedup();
        pb.sort();
        pb.dedup();
        prop_assert_eq!(pa.len(), set.len());
        prop_assert_eq!(pb.len(), set.len());
    }

    #[test]
    fn scale_invariant((seed, ra, ca, rb, cb, ch) in grid_pair(), k in prop::sample::select(vec![0.5f32, 2.0, 4.0, 0.125])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 1, ch, ra, ca);
        let b = random_map(&mut rng, 1, ch, rb, cb);
        let scaled = FeatureMap::new(1, ch, ra, ca, a.data().iter().map(|v| v * k).collect()).unwrap();
        prop_assert_eq!(
            dnns_maps(&a, &b, ratio(0.9)).unwrap(),
            dnns_maps(&scaled, &b, ratio(0.9)).unwrap()
        );
    }

    #[test]
    fn nearest_two_ordered(seed in any::<u64>(), n in 1usize..30, ch in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 1, ch, 1, n);
        let view = DescriptorView::full(&map);
        let q = view.descriptor(0).to_vec();
        let nn = dfm::dnns::nearest_two(&q, &view).unwrap();
        prop_assert!(nn.dist <= nn.second_dist);
        if n == 1 {
            prop_assert_eq!(nn.second_dist, f64::INFINITY);
        }
    }

    #[test]
    fn sub_views_match_oracle(seed in any::<u64>(), na in 1usize..12, nb in 1usize..12, r in 0.5f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_map(&mut rng, 3, 6, 4, 4);
        let b = random_map(&mut rng, 3, 6, 4, 4);
        let pa: Vec<_> = all_points(&a).into_iter().step_by(16 / na.max(1)).take(na).collect();
        let pb: Vec<_> = all_points(&b).into_iter().rev().step_by(16 / nb.max(1)).take(nb).collect();
        let got = dnns(
            &DescriptorView::from_points(&a, pa.clone()).unwrap(),
            &DescriptorView::from_points(&b, pb.clone()).unwrap(),
            ratio(r),
        ).unwrap();
        let mut want = brute_dnns_points(&a, &pa, &b, &pb, r);
        want.sort();
        prop_assert_eq!(got.matches(), want.as_slice());
    }
}
