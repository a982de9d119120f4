use std::sync::Arc;

use crate::autodiff::{Scalar, SegmentMap};
use crate::hypergraph::{DegreeInfo, IncidenceStructure};

use super::LayerError;

/// Precomputed gather maps and degree scalings for one hypergraph.
///
/// Stage 1 groups member vertices per hyperedge; stage 2 groups incident
/// hyperedges per vertex. Incidence pairs `(i, e)` are enumerated in stage-2
/// order, so the pairs of vertex `i` are contiguous.
#[derive(Debug, Clone)]
pub struct LayerContext<T> {
    num_vertices: usize,
    num_edges: usize,
    pub(crate) stage1: Arc<SegmentMap>,
    pub(crate) stage2: Arc<SegmentMap>,
    pub(crate) pair_vertex: Arc<Vec<usize>>,
    pub(crate) pair_edge: Arc<Vec<usize>>,
    /// Per-vertex pair groups, skipping vertices without incidences.
    pub(crate) softmax_groups: Arc<SegmentMap>,
    /// Per-vertex pair groups over pair rows, including empty ones.
    pub(crate) pair_sum: Arc<SegmentMap>,
    pub(crate) inv_sqrt_dv: Arc<Vec<T>>,
    pub(crate) inv_sqrt_de: Arc<Vec<T>>,
    degrees: DegreeInfo,
}

/// `1/sqrt(d)`, with zero degrees mapped to 1; such rows only ever scale an
/// empty sum.
fn inv_sqrt<T: Scalar>(d: &[f64]) -> Arc<Vec<T>> {
    Arc::new(
        d.iter()
            .map(|&v| if v > 0.0 { T::c(1.0 / v.sqrt()) } else { T::one() })
            .collect(),
    )
}

impl<T: Scalar> LayerContext<T> {
    pub fn new(h: &IncidenceStructure) -> Result<Self, LayerError> {
        let n = h.num_vertices();
        let m = h.num_edges();
        let (eo, ev) = h.member_csr();
        let stage1 = SegmentMap::new(eo.to_vec(), ev.to_vec(), n)?;
        let (vo, vi) = h.incident_csr();
        let stage2 = SegmentMap::new(vo.to_vec(), vi.to_vec(), m)?;
        let num_pairs = vi.len();
        let mut pair_vertex = Vec::with_capacity(num_pairs);
        for i in 0..n {
            pair_vertex.extend(std::iter::repeat_n(i, vo[i + 1] - vo[i]));
        }
        let mut soft_offsets = vec![0];
        for i in 0..n {
            if vo[i + 1] > vo[i] {
                soft_offsets.push(vo[i + 1]);
            }
        }
        let softmax_groups = SegmentMap::contiguous(soft_offsets)?;
        let pair_sum = SegmentMap::contiguous(vo.to_vec())?;
        let degrees = h.degrees();
        Ok(LayerContext {
            num_vertices: n,
            num_edges: m,
            stage1: Arc::new(stage1),
            stage2: Arc::new(stage2),
            pair_vertex: Arc::new(pair_vertex),
            pair_edge: Arc::new(vi.to_vec()),
            softmax_groups: Arc::new(softmax_groups),
            pair_sum: Arc::new(pair_sum),
            inv_sqrt_dv: inv_sqrt(&degrees.d_vertex),
            inv_sqrt_de: inv_sqrt(&degrees.d_edge),
            degrees,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_edge.len()
    }

    pub fn degrees(&self) -> &DegreeInfo {
        &self.degrees
    }

    /// Vertex owning each incidence pair, in pair order.
    pub fn pair_vertices(&self) -> &[usize] {
        &self.pair_vertex
    }

    /// Hyperedge of each incidence pair, in pair order.
    pub fn pair_edges(&self) -> &[usize] {
        &self.pair_edge
    }
}
