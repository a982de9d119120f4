//! Color refinement (1-GWL) on hypergraphs.
//!
//! One iteration colors every hyperedge by the multiset of its members'
//! colors, then recolors every vertex by its own color together with the
//! multiset of its incident hyperedge colors. Signatures are compressed to
//! small integers through a [`ColorDictionary`] that must be shared by every
//! hypergraph whose colors are compared.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::IncidenceStructure;

/// Largest vertex count accepted by [`brute_force_isomorphic`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwlError {
    #[error("brute-force isomorphism limited to {limit} vertices, got {n}")]
    TooLargeForBruteForce { n: usize, limit: usize },
}

const TAG_INIT: u64 = 0;
const TAG_EDGE: u64 = 1;
const TAG_VERTEX: u64 = 2;

/// Injective map from serialized signatures to dense codes. Code 0 is the
/// initial vertex color.
#[derive(Debug, Clone)]
pub struct ColorDictionary {
    codes: HashMap<Vec<u64>, u32>,
    signatures: Vec<Vec<u64>>,
}

impl Default for ColorDictionary {
    fn default() -> Self {
        let mut d = ColorDictionary {
            codes: HashMap::new(),
            signatures: Vec::new(),
        };
        d.code(vec![TAG_INIT]);
        d
    }
}

impl ColorDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Code for `signature`, allocating the next free one on first sight.
    pub fn code(&mut self, signature: Vec<u64>) -> u32 {
        if let Some(&c) = self.codes.get(&signature) {
            return c;
        }
        let c = u32::try_from(self.signatures.len()).expect("fewer than 2^32 colors");
        self.signatures.push(signature.clone());
        self.codes.insert(signature, c);
        c
    }

    pub fn signature(&self, code: u32) -> Option<&[u64]> {
        self.signatures.get(code as usize).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorAssignment {
    pub vertex_colors: Vec<u32>,
    /// Empty at iteration 0.
    pub edge_colors: Vec<u32>,
    pub iteration: usize,
}

impl ColorAssignment {
    pub fn initial(h: &IncidenceStructure) -> Self {
        ColorAssignment {
            vertex_colors: vec![0; h.num_vertices()],
            edge_colors: Vec::new(),
            iteration: 0,
        }
    }

    /// Sorted `(color, count)` pairs of the vertex colors.
    pub fn histogram(&self) -> Vec<(u32, usize)> {
        let mut counts = BTreeMap::new();
        for &c in &self.vertex_colors {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }

    pub fn num_classes(&self) -> usize {
        self.histogram().len()
    }
}

/// `[tag, len, sorted items...]`.
fn signature(tag: u64, head: &[u64], mut items: Vec<u64>) -> Vec<u64> {
    items.sort_unstable();
    let mut sig = Vec::with_capacity(items.len() + head.len() + 2);
    sig.push(tag);
    sig.extend_from_slice(head);
    sig.push(items.len() as u64);
    sig.extend(items);
    sig
}

pub fn refine_step(h: &IncidenceStructure, colors: &ColorAssignment, dict: &mut ColorDictionary) -> ColorAssignment {
    let edge_colors: Vec<u32> = h
        .edges()
        .map(|members| {
            let items = members.iter().map(|&j| u64::from(colors.vertex_colors[j])).collect();
            dict.code(signature(TAG_EDGE, &[], items))
        })
        .collect();
    // the own color is common to every pair, so it is stored once
    let vertex_colors = (0..h.num_vertices())
        .map(|i| {
            let items = h.incident(i).iter().map(|&e| u64::from(edge_colors[e])).collect();
            dict.code(signature(TAG_VERTEX, &[u64::from(colors.vertex_colors[i])], items))
        })
        .collect();
    ColorAssignment {
        vertex_colors,
        edge_colors,
        iteration: colors.iteration + 1,
    }
}

/// True when both colorings induce the same blocks of vertex indices.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    /// Vertex color histogram after each iteration, starting at 0.
    pub histograms: Vec<Vec<(u32, usize)>>,
    /// First iteration whose partition equals the previous one, if reached.
    pub stable_at: Option<usize>,
    pub final_colors: Vec<u32>,
}

fn hard_cap(h: &IncidenceStructure) -> usize {
    h.num_vertices() * h.num_edges().max(1)
}

pub fn refine_to_stability(h: &IncidenceStructure, max_iters: usize) -> RefinementTrace {
    let mut dict = ColorDictionary::new();
    let mut colors = ColorAssignment::initial(h);
    let mut histograms = vec![colors.histogram()];
    let mut stable_at = None;
    for _ in 0..max_iters.max(1).min(hard_cap(h).max(1)) {
        let next = refine_step(h, &colors, &mut dict);
        histograms.push(next.histogram());
        let stable = same_partition(&colors.vertex_colors, &next.vertex_colors);
        colors = next;
        if stable {
            stable_at = Some(colors.iteration);
            break;
        }
    }
    RefinementTrace {
        histograms,
        stable_at,
        final_colors: colors.vertex_colors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Distinguishable,
    NotDistinguished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distinction {
    pub verdict: Verdict,
    /// Iteration at which the histograms first differed, or the last one
    /// compared.
    pub iteration: usize,
}

/// Refines both hypergraphs in lockstep under one dictionary and compares
/// vertex color histograms after every iteration. Stops once the partition
/// of the disjoint union no longer splits.
pub fn distinguish(h1: &IncidenceStructure, h2: &IncidenceStructure, max_iters: usize) -> Distinction {
    if h1.num_vertices() != h2.num_vertices() {
        return Distinction {
            verdict: Verdict::Distinguishable,
            iteration: 0,
        };
    }
    let mut dict = ColorDictionary::new();
    let mut c1 = ColorAssignment::initial(h1);
    let mut c2 = ColorAssignment::initial(h2);
    let union_classes = |a: &ColorAssignment, b: &ColorAssignment| {
        let mut all: Vec<u32> = a.vertex_colors.iter().chain(&b.vertex_colors).copied().collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    };
    let mut classes = union_classes(&c1, &c2);
    let cap = max_iters.min(2 * h1.num_vertices() + 1).max(1);
    for _ in 0..cap {
        let n1 = refine_step(h1, &c1, &mut dict);
        let n2 = refine_step(h2, &c2, &mut dict);
        if n1.histogram() != n2.histogram() {
            return Distinction {
                verdict: Verdict::Distinguishable,
                iteration: n1.iteration,
            };
        }
        // own color is part of the signature, so classes only ever split
        let next_classes = union_classes(&n1, &n2);
        let done = next_classes == classes;
        classes = next_classes;
        c1 = n1;
        c2 = n2;
        if done {
            break;
        }
    }
    Distinction {
        verdict: Verdict::NotDistinguished,
        iteration: c1.iteration,
    }
}

/// Colors of every vertex of every hypergraph after `k` iterations under one
/// shared dictionary, so colors are comparable across the inputs.
pub fn local_colors(hs: &[&IncidenceStructure], k: usize) -> Vec<Vec<u32>> {
    let mut dict = ColorDictionary::new();
    hs.iter()
        .map(|h| {
            let mut c = ColorAssignment::initial(h);
            for _ in 0..k {
                c = refine_step(h, &c, &mut dict);
            }
            c.vertex_colors
        })
        .collect()
}

/// Color of vertex `i` after `k` iterations. Only comparable with colors
/// from the same call; use [`local_colors`] across hypergraphs.
pub fn local_color(h: &IncidenceStructure, i: usize, k: usize) -> u32 {
    local_colors(&[h], k)[0][i]
}

fn sorted_edges(edges: impl Iterator<Item = Vec<usize>>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = edges
        .map(|mut e| {
            e.sort_unstable();
            e
        })
        .collect();
    out.sort();
    out
}

/// Exhaustive search for a vertex bijection mapping the edge multiset of
/// `h1` onto that of `h2`.
pub fn brute_force_isomorphic(h1: &IncidenceStructure, h2: &IncidenceStructure) -> Result<bool, GwlError> {
    let n = h1.num_vertices().max(h2.num_vertices());
    if n > BRUTE_FORCE_LIMIT {
        return Err(GwlError::TooLargeForBruteForce {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if h1.num_vertices() != h2.num_vertices() || h1.num_edges() != h2.num_edges() {
        return Ok(false);
    }
    let deg = |h: &IncidenceStructure| (0..h.num_vertices()).map(|i| h.incident(i).len()).collect::<Vec<_>>();
    let (d1, d2) = (deg(h1), deg(h2));
    let mut s1 = d1.clone();
    let mut s2 = d2.clone();
    s1.sort_unstable();
    s2.sort_unstable();
    if s1 != s2 {
        return Ok(false);
    }
    let target = sorted_edges(h2.edges().map(<[usize]>::to_vec));
    let n = h1.num_vertices();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn search(
        v: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        d1: &[usize],
        d2: &[usize],
        h1: &IncidenceStructure,
        target: &[Vec<usize>],
    ) -> bool {
        if v == map.len() {
            let image = sorted_edges(h1.edges().map(|e| e.iter().map(|&u| map[u]).collect()));
            return image == target;
        }
        for t in 0..map.len() {
            if used[t] || d1[v] != d2[t] {
                continue;
            }
            used[t] = true;
            map[v] = t;
            if search(v + 1, map, used, d1, d2, h1, target) {
                return true;
            }
            used[t] = false;
        }
        false
    }

    Ok(search(0, &mut map, &mut used, &d1, &d2, h1, &target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hg(n: usize, edges: &[&[usize]]) -> IncidenceStructure {
        IncidenceStructure::build(n, edges).unwrap()
    }

    #[test]
    fn single_edge_step() {
        let h = hg(3, &[&[0, 1, 2]]);
        let mut dict = ColorDictionary::new();
        let c = refine_step(&h, &ColorAssignment::initial(&h), &mut dict);
        assert_eq!(c.edge_colors.len(), 1);
        assert_eq!(dict.signature(c.edge_colors[0]).unwrap(), &[TAG_EDGE, 3, 0, 0, 0]);
        assert!(c.vertex_colors.iter().all(|&v| v == c.vertex_colors[0]));
        assert_ne!(c.vertex_colors[0], 0);
    }

    #[test]
    fn triangle_versus_full_edge() {
        let h1 = hg(3, &[&[0, 1, 2]]);
        let h2 = hg(3, &[&[0, 1], &[1, 2], &[0, 2]]);
        let colors = local_colors(&[&h1, &h2], 1);
        assert!(colors[0].iter().all(|c| !colors[1].contains(c)));
        assert_eq!(
            distinguish(&h1, &h2, 10),
            Distinction {
                verdict: Verdict::Distinguishable,
                iteration: 1
            }
        );
        assert!(!brute_force_isomorphic(&h1, &h2).unwrap());
    }

    #[test]
    fn isolated_vertex_has_own_color() {
        let h = hg(3, &[&[0, 1]]);
        let c = local_colors(&[&h], 1);
        assert_ne!(c[0][2], c[0][0]);
        assert_eq!(c[0][0], c[0][1]);
    }

    #[test]
    fn stability_examples() {
        let edgeless = hg(4, &[]);
        let t = refine_to_stability(&edgeless, 10);
        assert_eq!(t.stable_at, Some(1));
        assert_eq!(t.histograms[1].len(), 1);

        let path = hg(3, &[&[0, 1], &[1, 2]]);
        let t = refine_to_stability(&path, 10);
        assert_eq!(t.stable_at, Some(2));
        assert_eq!(t.histograms[1].len(), 2);
        assert_eq!(t.final_colors[0], t.final_colors[2]);
        assert_ne!(t.final_colors[0], t.final_colors[1]);

        let full = hg(5, &[&[0, 1, 2, 3, 4]]);
        let t = refine_to_stability(&full, 10);
        assert!(t.histograms.iter().all(|h| h.len() == 1));
        for h in &t.histograms {
            assert_eq!(h.iter().map(|p| p.1).sum::<usize>(), 5);
        }
    }

    #[test]
    fn distinguish_sizes_and_permutations() {
        let a = hg(3, &[&[0, 1]]);
        let b = hg(4, &[&[0, 1]]);
        assert_eq!(distinguish(&a, &b, 5).iteration, 0);
        let h = hg(5, &[&[0, 1, 2], &[2, 3], &[3, 4], &[4]]);
        let p = h.permute(&[3, 0, 4, 1, 2]).unwrap();
        assert_eq!(distinguish(&h, &p, 20).verdict, Verdict::NotDistinguished);
        assert!(brute_force_isomorphic(&h, &p).unwrap());
    }

    #[test]
    fn local_color_examples() {
        let h1 = hg(3, &[&[0, 1, 2]]);
        let h2 = hg(3, &[&[0, 1], &[0, 2]]);
        assert_eq!(local_color(&h1, 1, 0), 0);
        let c = local_colors(&[&h1, &h2], 1);
        assert_ne!(c[0][0], c[1][0]);
        for k in 0..4 {
            let c = local_colors(&[&h2], k);
            assert_eq!(c[0][1], c[0][2]);
        }
    }

    #[test]
    fn brute_force_examples() {
        assert!(!brute_force_isomorphic(&hg(2, &[&[0, 1]]), &hg(2, &[&[0], &[1]])).unwrap());
        let big = hg(9, &[]);
        assert!(matches!(
            brute_force_isomorphic(&big, &big),
            Err(GwlError::TooLargeForBruteForce { n: 9, .. })
        ));
        // duplicate edges are part of the multiset
        assert!(!brute_force_isomorphic(&hg(3, &[&[0, 1], &[0, 1]]), &hg(3, &[&[0, 1], &[1, 2]])).unwrap());
    }

    #[test]
    fn dictionary_round_trip() {
        let mut d = ColorDictionary::new();
        let sig = vec![TAG_EDGE, 2, 3, 5];
        let c = d.code(sig.clone());
        assert_eq!(d.signature(c).unwrap(), sig.as_slice());
        assert_eq!(d.code(sig), c);
        assert_eq!(d.signature(0).unwrap(), &[TAG_INIT]);
    }
}
