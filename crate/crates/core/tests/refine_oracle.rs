mod common;

use common::{brute_hra, is_child_of, random_map, random_parents, random_pyramid};
use dfm::dnns::{dnns_maps, RatioThreshold};
use dfm::refine::{hra_step, refine_full, refine_trace, ThresholdSchedule};
use dfm::{DfmError, MatchSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ten_random_parents_match_window_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fa = random_map(&mut rng, 3, 12, 16, 20);
        let fb = random_map(&mut rng, 3, 12, 16, 20);
        let parents = random_parents(&mut rng, 4, 8, 10, 10);
        let got = hra_step(&fa, &fb, &parents, RatioThreshold::new(0.9).unwrap()).unwrap();
        assert_eq!(
            got.matches(),
            brute_hra(&fa, &fb, &parents, 0.9).as_slice(),
            "seed {seed}"
        );
    }
}

#[test]
fn many_parents_take_the_parallel_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let fa = random_map(&mut rng, 1, 8, 64, 64);
    let fb = random_map(&mut rng, 1, 8, 64, 64);
    let parents = random_parents(&mut rng, 2, 32, 32, 600);
    assert!(parents.len() > 256);
    let got = hra_step(&fa, &fb, &parents, RatioThreshold::new(0.8).unwrap()).unwrap();
    assert_eq!(got.matches(), brute_hra(&fa, &fb, &parents, 0.8).as_slice());
}

#[test]
fn trace_is_composition_of_oracle_steps() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pa = random_pyramid(&mut rng, 3, 4, 8);
        let pb = random_pyramid(&mut rng, 3, 4, 8);
        let schedule = ThresholdSchedule::r09();
        let initial = dnns_maps(pa.layer(5), pb.layer(5), schedule.for_layer(5)).unwrap();
        if initial.is_empty() {
            continue;
        }
        let trace = refine_trace(&pa, &pb, initial.clone(), &schedule).unwrap();
        let mut expected = initial;
        for (k, got) in (1..=4u8).rev().zip(&trace[1..]) {
            let r = schedule.for_layer(k).value();
            let next = MatchSet::new(k, brute_hra(pa.layer(k), pb.layer(k), &expected, r)).unwrap();
            assert_eq!(got, &next, "seed {seed} layer {k}");
            if next.is_empty() {
                break;
            }
            expected = next;
        }
    }
}

#[test]
fn self_refinement_stays_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_pyramid(&mut rng, 4, 4, 16);
    for schedule in [ThresholdSchedule::r06(), ThresholdSchedule::r09()] {
        let initial = dnns_maps(p.layer(5), p.layer(5), schedule.for_layer(5)).unwrap();
        for set in refine_trace(&p, &p, initial, &schedule).unwrap() {
            assert!(set.iter().all(|m| m.a == m.b));
        }
    }
}

#[test]
fn empty_initial_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_pyramid(&mut rng, 2, 2, 4);
    assert!(matches!(
        refine_full(&p, &p, MatchSet::empty(5), &ThresholdSchedule::r06()),
        Err(DfmError::EmptyInitialSet)
    ));
}

#[test]
fn all_equal_window_gives_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fa = random_map(&mut rng, 2, 4, 4, 4);
    let fb = dfm::FeatureMap::new(2, 4, 4, 4, vec![1.0; 64]).unwrap();
    let parents = random_parents(&mut rng, 3, 2, 2, 3);
    assert!(hra_step(&fa, &fb, &parents, RatioThreshold::new(0.9).unwrap())
        .unwrap()
        .is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_invariants(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, count in 1usize..30, r in 0.4f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fa = random_map(&mut rng, 2, 6, rows * 2, cols * 2);
        let fb = random_map(&mut rng, 2, 6, rows * 2, cols * 2);
        let parents = random_parents(&mut rng, 3, rows, cols, count);
        let children = hra_step(&fa, &fb, &parents, RatioThreshold::new(r).unwrap()).unwrap();
        let expected = brute_hra(&fa, &fb, &parents, r);
        prop_assert_eq!(children.matches(), expected.as_slice());
        for c in &children {
            prop_assert!(parents.iter().any(|p| is_child_of(c, p)));
        }
        prop_assert!(children.len() <= 4 * parents.len());
    }

    #[test]
    fn injective_parents_give_injective_children(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, count in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fa = random_map(&mut rng, 2, 6, rows * 2, cols * 2);
        let fb = random_map(&mut rng, 2, 6, rows * 2, cols * 2);
        let raw = random_parents(&mut rng, 3, rows, cols, count);
        let (mut seen_a, mut seen_b) = (std::collections::HashSet::new(), std::collections::HashSet::new());
        let injective: Vec<_> = raw.iter().filter(|m| seen_a.insert(m.a) & seen_b.insert(m.b)).copied().collect();
        let parents = MatchSet::new(3, injective).unwrap();
        let children = hra_step(&fa, &fb, &parents, RatioThreshold::DISABLED).unwrap();
        let a: std::collections::HashSet<_> = children.iter().map(|m| m.a).collect();
        let b: std::collections::HashSet<_> = children.iter().map(|m| m.b).collect();
        prop_assert_eq!(a.len(), children.len());
        prop_assert_eq!(b.len(), children.len());
        prop_assert!(children.len() <= (fa.rows() * fa.cols()).min(fb.rows() * fb.cols()));
    }
}
