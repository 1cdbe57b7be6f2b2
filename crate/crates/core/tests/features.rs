use std::collections::BTreeSet;

use proptest::prelude::*;
use tap_surrogate::features::centrality::{closeness, edge_betweenness};
use tap_surrogate::features::{
    build_feature_matrix, engineered_features, one_hot, pairwise_encode, BaselineStats, FeatureBuilder, FeatureSpec,
    Representation, CSH_COLUMN, ENGINEERED_FEATURES,
};
use tap_surrogate::heuristics::SubsetIndex;
use tap_surrogate::network::{ClosureConfig, Link, Network, NodeId};
use tap_surrogate::scenario::{Dataset, LabeledScenario, SamplerConfig};
use tap_surrogate::tap::SolverOptions;

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (3usize..7).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let k = pairs.len();
        (Just(n), prop::sample::subsequence(pairs, 1..=k), prop::collection::vec(1u8..4, k)).prop_map(
            |(n, chosen, w)| (n, chosen.into_iter().zip(w).map(|((a, b), w)| (a, b, w as f64)).collect()),
        )
    })
}

fn to_network(n: usize, edges: &[(usize, usize, f64)]) -> Network {
    let nodes: Vec<NodeId> = (1..=n as NodeId).collect();
    let links = edges.iter().map(|&(a, b, w)| Link::new(a as NodeId + 1, b as NodeId + 1, w, 1.0)).collect();
    Network::new(nodes, links).unwrap()
}

/// Every simple path from `s` to `t` as a list of edge positions.
fn simple_paths(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn walk(
        at: usize,
        t: usize,
        edges: &[(usize, usize, f64)],
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == t {
            out.push(path.clone());
            return;
        }
        for (e, &(a, b, _)) in edges.iter().enumerate() {
            if a == at && !seen[b] {
                seen[b] = true;
                path.push(e);
                walk(b, t, edges, seen, path, out);
                path.pop();
                seen[b] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut out = Vec::new();
    walk(s, t, edges, &mut seen, &mut Vec::new(), &mut out);
    out
}

fn brute_betweenness(n: usize, edges: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut bc = vec![0.0; edges.len()];
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s) {
            let paths = simple_paths(n, edges, s, t);
            let len = |p: &Vec<usize>| p.iter().map(|&e| edges[e].2).sum::<f64>();
            let Some(best) = paths.iter().map(len).reduce(f64::min) else { continue };
            let shortest: Vec<&Vec<usize>> = paths.iter().filter(|p| len(p) == best).collect();
            for p in &shortest {
                for &e in p.iter() {
                    bc[e] += 1.0 / shortest.len() as f64;
                }
            }
        }
    }
    bc
}

fn brute_closeness(n: usize, edges: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        d[a][b] = d[a][b].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d.iter()
        .map(|row| {
            let reach: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
            let r = reach.len() as f64;
            let total: f64 = reach.iter().sum();
            if r <= 1.0 {
                0.0
            } else {
                (r - 1.0) / total * (r - 1.0) / (n as f64 - 1.0)
            }
        })
        .collect()
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

fn stats(n: usize) -> BaselineStats {
    let v = |k: f64| (0..n).map(|i| k + i as f64).collect::<Vec<_>>();
    BaselineStats {
        baseline_ttt: 1000.0,
        flow: v(10.0),
        cost: v(1.0),
        betweenness: v(3.0),
        closeness: v(0.5),
        fft: v(2.0),
        capacity: v(100.0),
    }
}

fn dataset(rows: &[(BTreeSet<usize>, f64)]) -> Dataset {
    Dataset {
        scenarios: rows
            .iter()
            .map(|(s, y)| LabeledScenario {
                config: ClosureConfig::from_indices(s.iter().copied()),
                ttt: *y,
                gap: 0.0,
                solve_time: 0.0,
            })
            .collect(),
        network_fingerprint: String::new(),
        rng_seed: 0,
        baseline_ttt: 1000.0,
        solver: SolverOptions::default(),
        sampler: SamplerConfig::default(),
    }
}

const N: usize = 8;

fn rows() -> impl Strategy<Value = Vec<(BTreeSet<usize>, f64)>> {
    prop::collection::btree_map(prop::collection::btree_set(0..N, 1..5), 1000.0..5000.0f64, 1..25)
        .prop_map(|m| m.into_iter().collect::<Vec<_>>())
        .prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn betweenness_matches_path_enumeration((n, edges) in graph()) {
        let net = to_network(n, &edges);
        let w: Vec<f64> = edges.iter().map(|e| e.2).collect();
        let got = edge_betweenness(&net, &w);
        let want = brute_betweenness(n, &edges);
        prop_assert!(close(&got, &want), "{got:?} vs {want:?}");
    }

    #[test]
    fn closeness_matches_all_pairs((n, edges) in graph()) {
        let net = to_network(n, &edges);
        let w: Vec<f64> = edges.iter().map(|e| e.2).collect();
        let got = closeness(&net, &w);
        let want = brute_closeness(n, &edges);
        prop_assert!(close(&got, &want), "{got:?} vs {want:?}");
    }

    #[test]
    fn encodings_count_closed_links_and_pairs(s in prop::collection::btree_set(0..N, 0..N)) {
        let c = ClosureConfig::from_indices(s.iter().copied());
        let k = s.len() as f64;
        let oh = one_hot(&c, N).unwrap();
        prop_assert_eq!(oh.len(), N);
        prop_assert_eq!(oh.iter().sum::<f64>(), k);
        let pw = pairwise_encode(&c, N).unwrap();
        prop_assert_eq!(pw.len(), N * (N - 1) / 2);
        prop_assert_eq!(pw.iter().sum::<f64>(), k * (k - 1.0) / 2.0);
    }

    #[test]
    fn engineered_values_follow_their_names(s in prop::collection::btree_set(0..N, 1..N)) {
        let st = stats(N);
        let c = ClosureConfig::from_indices(s.iter().copied());
        let f = engineered_features(&c, &st).unwrap();
        let get = |name: &str| f.iter().find(|(n, _)| *n == name).unwrap().1;
        let sum = |v: &[f64]| s.iter().map(|&i| v[i]).sum::<f64>();
        let max = |v: &[f64]| s.iter().map(|&i| v[i]).fold(f64::MIN, f64::max);
        let k = s.len() as f64;
        prop_assert_eq!(get("set_size"), k);
        prop_assert!((get("disrupted_flow_sum") - sum(&st.flow)).abs() < 1e-9);
        prop_assert!((get("capacity_max") - max(&st.capacity)).abs() < 1e-9);
        prop_assert!((get("fft_mean") - sum(&st.fft) / k).abs() < 1e-9);
        let impact: f64 = s.iter().map(|&i| st.flow[i] * st.cost[i]).sum();
        prop_assert!((get("naive_impact_sum") - impact).abs() < 1e-9);
    }

    #[test]
    fn csh_column_only_sees_earlier_rows(data in rows(), seed in any::<u64>()) {
        let st = stats(N);
        let spec = FeatureSpec { representation: Representation::Engineered, selected: None, include_csh: true };
        let ds = dataset(&data);
        let prior = SubsetIndex::with_baseline(1000.0);
        let m = build_feature_matrix(&ds, &spec, &st, Some(&prior)).unwrap();
        let col = m.column_index(CSH_COLUMN).unwrap();
        for (i, (q, _)) in data.iter().enumerate() {
            let want = data[..i].iter().filter(|(s, _)| s.is_subset(q)).map(|r| r.1).fold(1000.0, f64::max);
            prop_assert_eq!(m.get(i, col), want);
        }
        // shuffling the tail leaves the head rows untouched
        let cut = data.len() / 2;
        let mut shuffled = data.clone();
        let tail = &mut shuffled[cut..];
        let len = tail.len();
        for i in 0..len {
            tail.swap(i, (seed as usize).wrapping_add(i * 7) % len);
        }
        for r in tail.iter_mut() {
            r.1 += 1.0;
        }
        let m2 = build_feature_matrix(&dataset(&shuffled), &spec, &st, Some(&prior)).unwrap();
        for i in 0..cut {
            prop_assert_eq!(m.row(i), m2.row(i));
        }
    }
}

#[test]
fn column_counts_match_representation() {
    let st = stats(N);
    let sel = vec!["fft_sum".to_string(), "set_size".to_string()];
    let cases = [
        (Representation::OneHot, None, N),
        (Representation::Pairwise, None, N + N * (N - 1) / 2),
        (Representation::Engineered, None, ENGINEERED_FEATURES.len()),
        (Representation::Engineered, Some(sel.clone()), 2),
        (Representation::Combined, None, N + ENGINEERED_FEATURES.len()),
        (Representation::Combined, Some(sel), N + 2),
    ];
    for (rep, selected, width) in cases {
        for csh in [false, true] {
            let spec = FeatureSpec { representation: rep, selected: selected.clone(), include_csh: csh };
            let b = FeatureBuilder::new(&spec, &st).unwrap();
            assert_eq!(b.width(), width + csh as usize, "{rep:?} {csh}");
            let row = b.encode(&ClosureConfig::from_indices([1, 3]), csh.then_some(1.0)).unwrap();
            assert_eq!(row.len(), b.width());
        }
    }
}

#[test]
fn unknown_selection_is_rejected() {
    let spec = FeatureSpec {
        representation: Representation::Engineered,
        selected: Some(vec!["not_a_feature".into()]),
        include_csh: false,
    };
    assert!(FeatureBuilder::new(&spec, &stats(N)).is_err());
}
