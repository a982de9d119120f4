//! Planted-partition hypergraphs with bag-of-words features, for examples
//! and tests that need a learnable dataset without external files.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::hypergraph::IncidenceStructure;

use super::dataset::{stratified_split, DatasetBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_vertices: usize,
    pub num_classes: usize,
    pub num_edges: usize,
    /// Hyperedge sizes are drawn uniformly from this inclusive range.
    pub min_edge_size: usize,
    pub max_edge_size: usize,
    /// Probability that a hyperedge member shares the edge's class.
    pub homophily: f64,
    pub feature_dim: usize,
    /// Words per vertex.
    pub words: usize,
    /// Probability that a word comes from the vertex's class vocabulary.
    pub feature_signal: f64,
    pub label_rate: f64,
    /// Fraction of the non-training vertices held out for validation.
    pub val_fraction: f64,
    pub num_splits: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_vertices: 400,
            num_classes: 4,
            num_edges: 240,
            min_edge_size: 2,
            max_edge_size: 5,
            homophily: 0.85,
            feature_dim: 64,
            words: 8,
            feature_signal: 0.35,
            label_rate: 0.05,
            val_fraction: 0.1,
            num_splits: 4,
            seed: 0,
        }
    }
}

/// Generates a dataset; identical configs give identical bundles.
pub fn planted_partition(cfg: &SyntheticConfig) -> DatasetBundle {
    assert!(cfg.num_classes >= 1 && cfg.num_vertices >= cfg.num_classes);
    assert!(cfg.min_edge_size >= 1 && cfg.min_edge_size <= cfg.max_edge_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_vertices;
    let c = cfg.num_classes;

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);
    let mut by_class = vec![Vec::new(); c];
    for (v, &l) in labels.iter().enumerate() {
        by_class[l].push(v);
    }

    let mut edges = Vec::with_capacity(cfg.num_edges);
    for _ in 0..cfg.num_edges {
        let home = rng.gen_range(0..c);
        let k = rng.gen_range(cfg.min_edge_size..=cfg.max_edge_size);
        let edge: Vec<usize> = (0..k)
            .map(|_| {
                if rng.gen_bool(cfg.homophily) {
                    *by_class[home].choose(&mut rng).expect("class non-empty")
                } else {
                    rng.gen_range(0..n)
                }
            })
            .collect();
        edges.push(edge);
    }
    let hypergraph = IncidenceStructure::build(n, &edges).expect("ids in range");

    // each class owns a contiguous slice of the vocabulary
    let d = cfg.feature_dim;
    let band = (d / c).max(1);
    let mut features = Matrix::<f32>::zeros(n, d);
    for (v, &label) in labels.iter().enumerate() {
        for _ in 0..cfg.words {
            let j = if rng.gen_bool(cfg.feature_signal) {
                (label * band + rng.gen_range(0..band)) % d
            } else {
                rng.gen_range(0..d)
            };
            let cur = features.get(v, j);
            features.set(v, j, cur + 1.0);
        }
        let total: f32 = features.row(v).iter().sum();
        if total > 0.0 {
            for x in features.row_mut(v) {
                *x /= total;
            }
        }
    }

    let mut splits = BTreeMap::new();
    for s in 0..cfg.num_splits {
        splits.insert(s.to_string(), stratified_split(&labels, c, cfg.label_rate, cfg.val_fraction, &mut rng));
    }
    DatasetBundle {
        name: format!("planted-{n}x{c}-s{}", cfg.seed),
        hypergraph,
        features,
        labels,
        num_classes: c,
        splits,
        label_rate: Some(cfg.label_rate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let cfg = SyntheticConfig {
            num_vertices: 60,
            num_edges: 30,
            ..SyntheticConfig::default()
        };
        let a = planted_partition(&cfg);
        let b = planted_partition(&cfg);
        assert_eq!(a.features, b.features);
        assert_eq!(a.hypergraph, b.hypergraph);
        assert_eq!(a.splits, b.splits);
        assert_eq!(a.splits.len(), cfg.num_splits);
        a.hypergraph.validate().unwrap();
        for v in 0..60 {
            let s: f32 = a.features.row(v).iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }
}
