mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unignn::autodiff::segment::{segment_mean, segment_softmax, segment_sum};
use unignn::autodiff::{Matrix, SegmentMap};
use unignn::gwl::{refine_step, refine_to_stability, ColorAssignment, ColorDictionary};
use unignn::hypergraph::IncidenceStructure;

use common::*;

fn hypergraph() -> impl Strategy<Value = IncidenceStructure> {
    (1usize..10, 0usize..10, any::<u64>()).prop_map(|(n, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_hypergraph(&mut rng, n, m, 4)
    })
}

/// Groups over `sources` rows, possibly empty, possibly repeating sources.
fn segments() -> impl Strategy<Value = (Vec<Vec<usize>>, usize)> {
    (1usize..8).prop_flat_map(|sources| (prop::collection::vec(prop::collection::vec(0..sources, 0..5), 1..6), Just(sources)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn incidence_lists_are_transposes(h in hypergraph()) {
        let mut pairs_by_edge: Vec<(usize, usize)> =
            (0..h.num_edges()).flat_map(|e| h.members(e).iter().map(move |&v| (v, e))).collect();
        let mut pairs_by_vertex: Vec<(usize, usize)> =
            (0..h.num_vertices()).flat_map(|v| h.incident(v).iter().map(move |&e| (v, e))).collect();
        pairs_by_edge.sort_unstable();
        pairs_by_vertex.sort_unstable();
        prop_assert_eq!(pairs_by_edge, pairs_by_vertex);
    }

    #[test]
    fn json_round_trip(h in hypergraph()) {
        let text = serde_json::to_string(&h.to_json()).unwrap();
        let back = IncidenceStructure::from_json_str(&text).unwrap();
        prop_assert_eq!(back.edge_lists(), h.edge_lists());
        prop_assert_eq!(back.num_vertices(), h.num_vertices());
    }

    #[test]
    fn self_loops_are_idempotent(h in hypergraph()) {
        let once = h.add_self_loops().unwrap();
        prop_assert!(once.has_all_self_loops());
        prop_assert_eq!(once.add_self_loops().unwrap().edge_lists(), once.edge_lists());
    }

    #[test]
    fn segment_ops_match_loops((groups, sources) in segments(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = from_dense(&random_dense(&mut rng, sources, 3));
        let map = Arc::new(SegmentMap::from_groups(&groups, sources).unwrap());
        let sum = segment_sum(&x, &map).unwrap();
        for (g, members) in groups.iter().enumerate() {
            for c in 0..3 {
                let expect: f64 = members.iter().map(|&s| x.get(s, c)).sum();
                prop_assert!((sum.get(g, c) - expect).abs() < 1e-12);
            }
        }
        let mean = segment_mean(&x, &map);
        prop_assert_eq!(mean.is_err(), groups.iter().any(|g| g.is_empty()));
        if let Ok(mean) = mean {
            for (g, members) in groups.iter().enumerate() {
                let expect: f64 = members.iter().map(|&s| x.get(s, 0)).sum::<f64>() / members.len() as f64;
                prop_assert!((mean.get(g, 0) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_per_group(groups in prop::collection::vec(1usize..6, 1..6), seed in any::<u64>()) {
        let offsets: Vec<usize> = std::iter::once(0).chain(groups.iter().scan(0, |acc, &g| { *acc += g; Some(*acc) })).collect();
        let total = *offsets.last().unwrap();
        let map = Arc::new(SegmentMap::contiguous(offsets.clone()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = Matrix::from_fn(total, 2, |_, _| rand::Rng::gen_range(&mut rng, -50.0..50.0));
        let soft = segment_softmax(&scores, &map).unwrap();
        for w in offsets.windows(2) {
            for c in 0..2 {
                let s: f64 = (w[0]..w[1]).map(|r| soft.get(r, c)).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!((w[0]..w[1]).all(|r| soft.get(r, c) >= 0.0));
            }
        }
    }

    #[test]
    fn refinement_only_splits_classes(h in hypergraph()) {
        let mut dict = ColorDictionary::new();
        let mut colors = ColorAssignment::initial(&h);
        for _ in 0..h.num_vertices() + 1 {
            let next = refine_step(&h, &colors, &mut dict);
            // equal new colors imply equal old colors
            for a in 0..h.num_vertices() {
                for b in 0..h.num_vertices() {
                    if next.vertex_colors[a] == next.vertex_colors[b] {
                        prop_assert_eq!(colors.vertex_colors[a], colors.vertex_colors[b]);
                    }
                }
            }
            prop_assert!(next.num_classes() >= colors.num_classes());
            colors = next;
        }
    }

    #[test]
    fn dictionary_codes_are_injective(sigs in prop::collection::vec(prop::collection::vec(0u64..4, 0..4), 1..30)) {
        let mut dict = ColorDictionary::new();
        let codes: Vec<u32> = sigs.iter().map(|s| dict.code(s.clone())).collect();
        for (i, a) in sigs.iter().enumerate() {
            prop_assert_eq!(dict.signature(codes[i]).unwrap(), a.as_slice());
            for (j, b) in sigs.iter().enumerate() {
                prop_assert_eq!(codes[i] == codes[j], a == b);
            }
        }
    }

    #[test]
    fn stable_partition_is_permutation_invariant(h in hypergraph(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = random_permutation(&mut rng, h.num_vertices());
        let a = refine_to_stability(&h, 100);
        let b = refine_to_stability(&h.permute(&sigma).unwrap(), 100);
        prop_assert_eq!(a.stable_at, b.stable_at);
        prop_assert_eq!(a.histograms.last().map(|x| x.len()), b.histograms.last().map(|x| x.len()));
    }
}
