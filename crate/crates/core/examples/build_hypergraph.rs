//! Building an incidence structure, inspecting degrees, adding self-loops,
//! inducing a sub-hypergraph and round-tripping through JSON.

use unignn::hypergraph::IncidenceStructure;
use unignn::layers::LayerContext;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = IncidenceStructure::build(5, &[vec![0, 1, 2], vec![2, 3], vec![3, 4], vec![0, 4]])?;
    println!("{} vertices, {} hyperedges, {} memberships", h.num_vertices(), h.num_edges(), h.num_memberships());
    for v in 0..h.num_vertices() {
        println!("  vertex {v} lies in hyperedges {:?}", h.incident(v));
    }

    let looped = h.add_self_loops()?;
    let ctx = LayerContext::<f64>::new(&looped)?;
    println!("with self-loops: {} hyperedges, {} (vertex, edge) pairs", looped.num_edges(), ctx.num_pairs());
    println!("degrees: {:?}", looped.degrees());

    let (sub, map) = h.induce(&[0, 1, 2, 3])?;
    println!("induced on 0..=3: {:?} (vertex map {:?})", sub.edge_lists(), map);

    let graph = vec![vec![1], vec![0, 2], vec![1]];
    let reduction = IncidenceStructure::reduction_from_graph(&graph, true)?;
    println!("graph reduction of a 3-path: {:?}", reduction.edge_lists());

    let text = serde_json::to_string(&h.to_json())?;
    println!("json: {text}");
    let back = IncidenceStructure::from_json_str(&text)?;
    assert_eq!(back.edge_lists(), h.edge_lists());
    Ok(())
}
