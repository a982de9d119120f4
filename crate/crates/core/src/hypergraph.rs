//! Hypergraph storage and the structural transforms used by the layers.
//!
//! An [`IncidenceStructure`] keeps both directions of the vertex/hyperedge
//! relation in CSR form: `members(e)` lists the vertices of hyperedge `e`
//! and `incident(i)` lists the hyperedges containing vertex `i`. Both lists
//! are strictly increasing. For hypergraphs built from edge lists the two
//! relations are transposes of each other (`symmetric == true`); the graph
//! reduction built by [`IncidenceStructure::reduction_from_graph`] is the
//! one asymmetric case, where a vertex "sees" singleton edges of its graph
//! neighbours without being a member of them.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HypergraphError {
    #[error("hypergraph has no vertices")]
    NoVertices,
    #[error("hyperedge {edge} is empty")]
    EmptyEdge { edge: usize },
    #[error("hyperedge {edge} references vertex {vertex}, but there are only {num_vertices} vertices")]
    VertexIdOutOfRange {
        edge: usize,
        vertex: usize,
        num_vertices: usize,
    },
    #[error("vertex map is not a bijection on 0..{num_vertices}: {reason}")]
    NotABijection { num_vertices: usize, reason: String },
    #[error("visible vertex set is empty")]
    EmptyVisibleSet,
    #[error("operation requires a symmetric incidence structure")]
    NotSymmetric,
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed hypergraph json at {path}: {message}")]
    Json { path: String, message: String },
}

/// Ragged array stored as offsets + flat values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    values: Vec<usize>,
}

impl Csr {
    fn from_rows<I, R>(rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[usize]>,
    {
        let mut offsets = vec![0];
        let mut values = Vec::new();
        for row in rows {
            values.extend_from_slice(row.as_ref());
            offsets.push(values.len());
        }
        Csr { offsets, values }
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, r: usize) -> &[usize] {
        &self.values[self.offsets[r]..self.offsets[r + 1]]
    }

    /// Transpose into a relation with `num_targets` rows. Rows come out sorted
    /// because sources are visited in increasing order.
    fn transpose(&self, num_targets: usize) -> Csr {
        let mut counts = vec![0usize; num_targets + 1];
        for &v in &self.values {
            counts[v + 1] += 1;
        }
        for t in 0..num_targets {
            counts[t + 1] += counts[t];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut values = vec![0usize; self.values.len()];
        for r in 0..self.len() {
            for &v in self.row(r) {
                values[cursor[v]] = r;
                cursor[v] += 1;
            }
        }
        Csr { offsets, values }
    }
}

/// A hypergraph `H = (V, E)` with dense 0-based ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceStructure {
    num_vertices: usize,
    edge_members: Csr,
    vertex_incident: Csr,
    symmetric: bool,
}

/// Vertex degrees `d_i = |E_i|` and average hyperedge degrees
/// `d_e = mean_{i in e} d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeInfo {
    pub d_vertex: Vec<f64>,
    pub d_edge: Vec<f64>,
}

/// The incidence graph `I(H)` on `V ∪ E` with one pair per membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteIncidenceGraph {
    pub num_left: usize,
    pub num_right: usize,
    /// `(vertex, hyperedge)` pairs, ordered by hyperedge then vertex.
    pub pairs: Vec<(usize, usize)>,
}

impl IncidenceStructure {
    /// Builds a symmetric structure. Member lists are sorted and deduplicated
    /// within each edge; duplicate edges are kept as distinct hyperedges.
    pub fn build<E: AsRef<[usize]>>(
        num_vertices: usize,
        edges: &[E],
    ) -> Result<Self, HypergraphError> {
        if num_vertices == 0 {
            return Err(HypergraphError::NoVertices);
        }
        let mut rows = Vec::with_capacity(edges.len());
        for (e, members) in edges.iter().enumerate() {
            let set: BTreeSet<usize> = members.as_ref().iter().copied().collect();
            if set.is_empty() {
                return Err(HypergraphError::EmptyEdge { edge: e });
            }
            if let Some(&vertex) = set.iter().next_back().filter(|&&v| v >= num_vertices) {
                return Err(HypergraphError::VertexIdOutOfRange {
                    edge: e,
                    vertex,
                    num_vertices,
                });
            }
            rows.push(set.into_iter().collect::<Vec<_>>());
        }
        let edge_members = Csr::from_rows(&rows);
        let vertex_incident = edge_members.transpose(num_vertices);
        Ok(IncidenceStructure {
            num_vertices,
            edge_members,
            vertex_incident,
            symmetric: true,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edge_members.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Sorted member vertices of hyperedge `e`.
    pub fn members(&self, e: usize) -> &[usize] {
        self.edge_members.row(e)
    }

    /// Sorted hyperedges incident to vertex `i`.
    pub fn incident(&self, i: usize) -> &[usize] {
        self.vertex_incident.row(i)
    }

    pub fn edges(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.num_edges()).map(move |e| self.members(e))
    }

    pub fn edge_lists(&self) -> Vec<Vec<usize>> {
        self.edges().map(<[usize]>::to_vec).collect()
    }

    /// Total number of (vertex, hyperedge) memberships on the composition side.
    pub fn num_memberships(&self) -> usize {
        self.edge_members.values.len()
    }

    /// Number of incidence pairs seen by stage-2 aggregation.
    pub fn num_incidences(&self) -> usize {
        self.vertex_incident.values.len()
    }

    pub(crate) fn member_csr(&self) -> (&[usize], &[usize]) {
        (&self.edge_members.offsets, &self.edge_members.values)
    }

    pub(crate) fn incident_csr(&self) -> (&[usize], &[usize]) {
        (&self.vertex_incident.offsets, &self.vertex_incident.values)
    }

    /// Checks the structural invariants, including the transpose round trip
    /// for symmetric structures.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_vertices;
        let m = self.num_edges();
        if self.vertex_incident.len() != n {
            return Err(format!("{} incident rows for {n} vertices", self.vertex_incident.len()));
        }
        for e in 0..m {
            let row = self.members(e);
            if row.is_empty() {
                return Err(format!("edge {e} empty"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("edge {e} not strictly increasing"));
            }
            if row.iter().any(|&v| v >= n) {
                return Err(format!("edge {e} has out of range member"));
            }
        }
        for i in 0..n {
            let row = self.incident(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("vertex {i} incident list not strictly increasing"));
            }
            if row.iter().any(|&e| e >= m) {
                return Err(format!("vertex {i} has out of range edge"));
            }
        }
        if self.symmetric {
            if self.edge_members.transpose(n) != self.vertex_incident {
                return Err("vertex_incident is not the transpose of edge_members".into());
            }
            if self.vertex_incident.transpose(m) != self.edge_members {
                return Err("edge_members is not the transpose of vertex_incident".into());
            }
        }
        Ok(())
    }

    /// Appends a singleton hyperedge `{i}` for every vertex that lacks one.
    /// Existing edge ids are preserved; the operation is idempotent.
    pub fn add_self_loops(&self) -> Result<Self, HypergraphError> {
        if !self.symmetric {
            return Err(HypergraphError::NotSymmetric);
        }
        let mut has_loop = vec![false; self.num_vertices];
        for e in self.edges() {
            if let [v] = e {
                has_loop[*v] = true;
            }
        }
        let mut rows = self.edge_lists();
        rows.extend(
            has_loop
                .iter()
                .enumerate()
                .filter(|(_, &present)| !present)
                .map(|(i, _)| vec![i]),
        );
        Self::build(self.num_vertices, &rows)
    }

    pub fn has_all_self_loops(&self) -> bool {
        let mut has_loop = vec![false; self.num_vertices];
        for e in self.edges() {
            if let [v] = e {
                has_loop[*v] = true;
            }
        }
        has_loop.into_iter().all(|b| b)
    }

    /// `d_i = |incident(i)|`, `d_e = mean of d_i over members(e)`.
    pub fn degrees(&self) -> DegreeInfo {
        let d_vertex: Vec<f64> = (0..self.num_vertices)
            .map(|i| self.incident(i).len() as f64)
            .collect();
        let d_edge = self
            .edges()
            .map(|members| {
                let total: f64 = members.iter().map(|&i| d_vertex[i]).sum();
                total / members.len() as f64
            })
            .collect();
        DegreeInfo { d_vertex, d_edge }
    }

    pub fn incidence_graph(&self) -> BipartiteIncidenceGraph {
        let pairs = self
            .edges()
            .enumerate()
            .flat_map(|(e, members)| members.iter().map(move |&v| (v, e)))
            .collect();
        BipartiteIncidenceGraph {
            num_left: self.num_vertices,
            num_right: self.num_edges(),
            pairs,
        }
    }

    /// Restricts the hypergraph to `visible` vertices. Vertices are renumbered
    /// densely in increasing id order; each hyperedge is intersected with the
    /// visible set, empty intersections are dropped and singletons are kept.
    ///
    /// Returns the induced structure and the old-to-new vertex map.
    pub fn induce(
        &self,
        visible: &[usize],
    ) -> Result<(Self, Vec<Option<usize>>), HypergraphError> {
        if visible.is_empty() {
            return Err(HypergraphError::EmptyVisibleSet);
        }
        let mut keep = vec![false; self.num_vertices];
        for &v in visible {
            if v >= self.num_vertices {
                return Err(HypergraphError::VertexIdOutOfRange {
                    edge: usize::MAX,
                    vertex: v,
                    num_vertices: self.num_vertices,
                });
            }
            keep[v] = true;
        }
        let mut map = vec![None; self.num_vertices];
        let mut next = 0;
        for (v, slot) in map.iter_mut().enumerate() {
            if keep[v] {
                *slot = Some(next);
                next += 1;
            }
        }
        let rows: Vec<Vec<usize>> = self
            .edges()
            .map(|members| members.iter().filter_map(|&v| map[v]).collect::<Vec<_>>())
            .filter(|row| !row.is_empty())
            .collect();
        Ok((Self::build(next, &rows)?, map))
    }

    /// The structure under which two-stage aggregation reproduces plain graph
    /// message passing: one singleton edge `e_j = {j}` per graph vertex, and
    /// vertex `i` incident to `e_j` for every neighbour `j` (plus `i` itself
    /// when `with_self`).
    pub fn reduction_from_graph(
        adjacency: &[Vec<usize>],
        with_self: bool,
    ) -> Result<Self, HypergraphError> {
        let n = adjacency.len();
        if n == 0 {
            return Err(HypergraphError::NoVertices);
        }
        let mut incident = Vec::with_capacity(n);
        for (i, neighbours) in adjacency.iter().enumerate() {
            let mut set = BTreeSet::new();
            for &j in neighbours {
                if j >= n {
                    return Err(HypergraphError::VertexIdOutOfRange {
                        edge: i,
                        vertex: j,
                        num_vertices: n,
                    });
                }
                set.insert(j);
            }
            if with_self {
                set.insert(i);
            }
            incident.push(set.into_iter().collect::<Vec<_>>());
        }
        Ok(IncidenceStructure {
            num_vertices: n,
            edge_members: Csr::from_rows((0..n).map(|j| [j])),
            vertex_incident: Csr::from_rows(&incident),
            symmetric: false,
        })
    }

    /// Relabels vertex `v` as `sigma[v]`; edge ids are unchanged.
    pub fn permute(&self, sigma: &[usize]) -> Result<Self, HypergraphError> {
        let n = self.num_vertices;
        if sigma.len() != n {
            return Err(HypergraphError::NotABijection {
                num_vertices: n,
                reason: format!("map has {} entries", sigma.len()),
            });
        }
        let mut seen = vec![false; n];
        for &t in sigma {
            if t >= n || seen[t] {
                return Err(HypergraphError::NotABijection {
                    num_vertices: n,
                    reason: format!("target {t} out of range or repeated"),
                });
            }
            seen[t] = true;
        }
        if !self.symmetric {
            return Err(HypergraphError::NotSymmetric);
        }
        let rows: Vec<Vec<usize>> = self
            .edges()
            .map(|members| members.iter().map(|&v| sigma[v]).collect())
            .collect();
        Self::build(n, &rows)
    }

    pub fn to_json(&self) -> HypergraphJson {
        HypergraphJson {
            num_vertices: self.num_vertices,
            hyperedges: self.edge_lists(),
        }
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, HypergraphError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HypergraphError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, HypergraphError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: HypergraphJson =
            serde_path_to_error::deserialize(de).map_err(|e| HypergraphError::Json {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Self::build(raw.num_vertices, &raw.hyperedges)
    }
}

/// Minimal on-disk hypergraph: `{"num_vertices": n, "hyperedges": [[...], ...]}`.
/// Extra dataset fields are ignored so a dataset file also loads as a hypergraph.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct HypergraphJson {
    pub num_vertices: usize,
    pub hyperedges: Vec<Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn incident_lists(h: &IncidenceStructure) -> Vec<Vec<usize>> {
        (0..h.num_vertices()).map(|i| h.incident(i).to_vec()).collect()
    }

    #[test]
    fn build_single_edge() {
        let h = IncidenceStructure::build(3, &[vec![0, 1, 2]]).unwrap();
        assert_eq!(incident_lists(&h), vec![vec![0], vec![0], vec![0]]);
        assert!(h.is_symmetric());
    }

    #[test]
    fn build_triangle_transpose() {
        let h = IncidenceStructure::build(3, &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(incident_lists(&h), vec![vec![0, 2], vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn build_errors() {
        let empty: Vec<Vec<usize>> = vec![vec![]];
        assert_eq!(
            IncidenceStructure::build(2, &empty),
            Err(HypergraphError::EmptyEdge { edge: 0 })
        );
        assert!(matches!(
            IncidenceStructure::build(2, &[vec![0, 2]]),
            Err(HypergraphError::VertexIdOutOfRange { edge: 0, vertex: 2, .. })
        ));
        assert_eq!(
            IncidenceStructure::build(0, &Vec::<Vec<usize>>::new()),
            Err(HypergraphError::NoVertices)
        );
    }

    #[test]
    fn build_dedups_within_edge_keeps_duplicate_edges() {
        let h = IncidenceStructure::build(3, &[vec![2, 0, 2], vec![0, 2]]).unwrap();
        assert_eq!(h.edge_lists(), vec![vec![0, 2], vec![0, 2]]);
        assert_eq!(h.incident(0), &[0, 1]);
    }

    #[test]
    fn self_loops_examples() {
        let h = IncidenceStructure::build(3, &[vec![0, 1, 2]]).unwrap();
        let s = h.add_self_loops().unwrap();
        assert_eq!(s.edge_lists(), vec![vec![0, 1, 2], vec![0], vec![1], vec![2]]);
        assert_eq!(s.add_self_loops().unwrap(), s);

        let h = IncidenceStructure::build(2, &[vec![0], vec![0, 1]]).unwrap();
        let s = h.add_self_loops().unwrap();
        assert_eq!(s.edge_lists(), vec![vec![0], vec![0, 1], vec![1]]);
    }

    #[test]
    fn degree_examples() {
        let h = IncidenceStructure::build(3, &[vec![0, 1, 2]])
            .unwrap()
            .add_self_loops()
            .unwrap();
        let d = h.degrees();
        assert_eq!(d.d_vertex, vec![2.0, 2.0, 2.0]);
        assert_eq!(d.d_edge, vec![2.0; 4]);

        let single = IncidenceStructure::build(1, &Vec::<Vec<usize>>::new())
            .unwrap()
            .add_self_loops()
            .unwrap();
        let d = single.degrees();
        assert_eq!((d.d_vertex, d.d_edge), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn reduction_degrees_match_graph() {
        // star 0-1, 0-2, 0-3
        let adj = vec![vec![1, 2, 3], vec![0], vec![0], vec![0]];
        let r = IncidenceStructure::reduction_from_graph(&adj, true).unwrap();
        let d = r.degrees();
        assert_eq!(d.d_vertex, vec![4.0, 2.0, 2.0, 2.0]);
        assert_eq!(d.d_edge, d.d_vertex);
        assert!(!r.is_symmetric());
        r.validate().unwrap();
    }

    #[test]
    fn reduction_examples() {
        let path = IncidenceStructure::reduction_from_graph(&[vec![1], vec![0]], true).unwrap();
        assert_eq!(incident_lists(&path), vec![vec![0, 1], vec![0, 1]]);

        let iso = IncidenceStructure::reduction_from_graph(&[vec![]], true).unwrap();
        assert_eq!(incident_lists(&iso), vec![vec![0]]);

        let tri = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let r = IncidenceStructure::reduction_from_graph(&tri, false).unwrap();
        assert_eq!(incident_lists(&r), vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        assert!(matches!(
            IncidenceStructure::reduction_from_graph(&[vec![3]], false),
            Err(HypergraphError::VertexIdOutOfRange { .. })
        ));
    }

    #[test]
    fn incidence_graph_examples() {
        let h = IncidenceStructure::build(2, &[vec![0, 1]]).unwrap();
        assert_eq!(h.incidence_graph().pairs, vec![(0, 0), (1, 0)]);
        let h = IncidenceStructure::build(3, &[vec![0, 1, 2], vec![1, 2]]).unwrap();
        assert_eq!(h.incidence_graph().pairs.len(), 5);
        let h = IncidenceStructure::build(4, &Vec::<Vec<usize>>::new()).unwrap();
        let g = h.incidence_graph();
        assert_eq!((g.num_left, g.pairs.len()), (4, 0));
    }

    #[test]
    fn induce_examples() {
        let h = IncidenceStructure::build(3, &[vec![0, 1, 2]]).unwrap();
        let (sub, map) = h.induce(&[0, 1]).unwrap();
        assert_eq!(sub.edge_lists(), vec![vec![0, 1]]);
        assert_eq!(map, vec![Some(0), Some(1), None]);

        let h = IncidenceStructure::build(4, &[vec![0, 1], vec![2, 3]]).unwrap();
        let (sub, _) = h.induce(&[0, 1]).unwrap();
        assert_eq!(sub.edge_lists(), vec![vec![0, 1]]);

        let (same, _) = h.induce(&[0, 1, 2, 3]).unwrap();
        assert_eq!(same, h);

        let (single, _) = h.induce(&[0, 2]).unwrap();
        assert_eq!(single.edge_lists(), vec![vec![0], vec![1]]);
        assert_eq!(h.induce(&[]), Err(HypergraphError::EmptyVisibleSet));
    }

    #[test]
    fn permute_examples() {
        let h = IncidenceStructure::build(3, &[vec![0], vec![0, 1, 2]]).unwrap();
        assert_eq!(h.permute(&[0, 1, 2]).unwrap(), h);
        let p = h.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.edge_lists(), vec![vec![2], vec![0, 1, 2]]);

        let h = IncidenceStructure::build(2, &[vec![0, 1]]).unwrap();
        assert_eq!(h.permute(&[1, 0]).unwrap(), h);
        assert!(matches!(
            h.permute(&[0, 0]),
            Err(HypergraphError::NotABijection { .. })
        ));
    }

    #[test]
    fn json_loader_reports_edge_index() {
        let err = IncidenceStructure::from_json_str(r#"{"num_vertices": 2, "hyperedges": [[0],[1,5]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("hyperedge 1"), "{err}");
        let err = IncidenceStructure::from_json_str(r#"{"num_vertices": 2, "hyperedges": [[0],["x"]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("hyperedges[1]"), "{err}");
    }
}
