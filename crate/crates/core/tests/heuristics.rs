use std::collections::BTreeSet;

use proptest::prelude::*;
use tap_surrogate::heuristics::{Heuristic, SubsetIndex};
use tap_surrogate::network::ClosureConfig;

const LINKS: usize = 10;
const BASE: f64 = 1000.0;

fn cfg(ids: &BTreeSet<usize>) -> ClosureConfig {
    ClosureConfig::from_indices(ids.iter().copied())
}

/// Monotone ground truth: additive link weights plus positive pair terms.
fn truth(weights: &[f64], ids: &BTreeSet<usize>) -> f64 {
    let v: Vec<usize> = ids.iter().copied().collect();
    let mut y = BASE + v.iter().map(|&i| weights[i]).sum::<f64>();
    for (a, &i) in v.iter().enumerate() {
        for &j in &v[a + 1..] {
            y += 0.1 * weights[i].min(weights[j]);
        }
    }
    y
}

fn sets() -> impl Strategy<Value = Vec<BTreeSet<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0..LINKS, 1..6), 0..40)
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0..500.0f64, LINKS)
}

fn build(w: &[f64], sets: &[BTreeSet<usize>]) -> SubsetIndex {
    let mut idx = SubsetIndex::with_baseline(BASE);
    for s in sets {
        idx.insert(&cfg(s), truth(w, s));
    }
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn csh_matches_brute_force_and_bounds_truth(w in weights(), known in sets(), q in prop::collection::btree_set(0..LINKS, 0..8)) {
        let idx = build(&w, &known);
        let brute = known.iter().filter(|s| s.is_subset(&q)).map(|s| truth(&w, s)).fold(BASE, f64::max);
        let csh = idx.csh(&cfg(&q)).unwrap();
        prop_assert_eq!(csh, brute);
        prop_assert!(csh >= BASE);
        prop_assert!(csh <= truth(&w, &q));
    }

    #[test]
    fn csuph_matches_brute_force_and_dominates_csh(w in weights(), known in sets(), q in prop::collection::btree_set(0..LINKS, 1..6)) {
        let idx = build(&w, &known);
        let brute = known.iter().filter(|s| q.is_subset(s)).map(|s| truth(&w, s)).reduce(f64::min);
        let up = idx.csuph(&cfg(&q)).unwrap();
        prop_assert_eq!(up, brute);
        if let Some(u) = up {
            prop_assert!(u >= idx.csh(&cfg(&q)).unwrap());
            prop_assert!(u >= truth(&w, &q));
        }
    }

    #[test]
    fn cash_is_at_least_csh(w in weights(), known in sets(), q in prop::collection::btree_set(0..LINKS, 0..8)) {
        let idx = build(&w, &known);
        let q = cfg(&q);
        prop_assert!(idx.cash(&q).unwrap() >= idx.csh(&q).unwrap());
    }

    #[test]
    fn csh_never_decreases_as_index_grows(w in weights(), known in sets(), q in prop::collection::btree_set(0..LINKS, 0..8)) {
        let q = cfg(&q);
        let mut idx = SubsetIndex::with_baseline(BASE);
        let mut last = idx.csh(&q).unwrap();
        for s in &known {
            idx.insert(&cfg(s), truth(&w, s));
            let now = idx.csh(&q).unwrap();
            prop_assert!(now >= last);
            last = now;
        }
    }

    #[test]
    fn inverted_index_is_complete(w in weights(), known in sets(), q in prop::collection::btree_set(0..LINKS, 0..8)) {
        let idx = build(&w, &known);
        let q = cfg(&q);
        let mut listed: Vec<usize> = idx.subsets_of(&q);
        listed.sort_unstable();
        let scanned: Vec<usize> = (0..idx.len()).filter(|&i| idx.entry(i).0.is_subset_of(&q)).collect();
        prop_assert_eq!(listed, scanned);
        for i in 0..idx.len() {
            for &l in idx.entry(i).0.ids() {
                prop_assert!(idx.entries_with(l).contains(&i));
            }
        }
    }

    #[test]
    fn exact_hit_returns_its_label(w in weights(), known in sets()) {
        let idx = build(&w, &known);
        for s in &known {
            let y = truth(&w, s);
            prop_assert_eq!(idx.csh(&cfg(s)).unwrap(), y);
            prop_assert_eq!(idx.estimate(Heuristic::AdditiveSubset, &cfg(s)).unwrap(), Some(y));
        }
    }
}

#[test]
fn missing_baseline_is_an_error() {
    let idx = SubsetIndex::new();
    let q = ClosureConfig::from_indices([1]);
    for h in Heuristic::ALL {
        assert!(idx.estimate(h, &q).is_err());
    }
}
