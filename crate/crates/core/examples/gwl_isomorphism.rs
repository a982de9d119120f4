//! 1-GWL color refinement: a pair it separates, a pair it cannot, and the
//! exact answer from brute force on both.

use unignn::gwl::{brute_force_isomorphic, distinguish, refine_to_stability};
use unignn::hypergraph::IncidenceStructure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let single = IncidenceStructure::build(3, &[vec![0, 1, 2]])?;
    let triangle = IncidenceStructure::build(3, &[vec![0, 1], vec![1, 2], vec![0, 2]])?;
    report("one 3-edge vs three 2-edges", &single, &triangle)?;

    // two disjoint triangles vs a 6-cycle, written as 2-uniform hypergraphs
    let two_triangles = IncidenceStructure::build(
        6,
        &[vec![0, 1], vec![1, 2], vec![0, 2], vec![3, 4], vec![4, 5], vec![3, 5]],
    )?;
    let hexagon = IncidenceStructure::build(
        6,
        &[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![0, 5]],
    )?;
    report("two triangles vs hexagon", &two_triangles, &hexagon)?;

    let trace = refine_to_stability(&hexagon, 10);
    println!("hexagon refinement stabilizes at iteration {:?}", trace.stable_at);
    Ok(())
}

fn report(label: &str, a: &IncidenceStructure, b: &IncidenceStructure) -> Result<(), Box<dyn std::error::Error>> {
    let d = distinguish(a, b, 100);
    let iso = brute_force_isomorphic(a, b)?;
    println!("{label}: 1-GWL says {:?} at iteration {}, isomorphic = {iso}", d.verdict, d.iteration);
    Ok(())
}
