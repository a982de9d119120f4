//! Sum readouts of untrained models on constant features: whenever a model
//! separates two hypergraphs, 1-GWL separates them too.

use unignn::autodiff::Matrix;
use unignn::gwl::{distinguish, Verdict};
use unignn::hypergraph::IncidenceStructure;
use unignn::layers::{Model, ModelSpec, Variant};

fn readout(model: &Model<f64>, h: &IncidenceStructure) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let x = Matrix::filled(h.num_vertices(), 2, 1.0);
    let y = model.predict(&model.prepare(h)?, &x)?;
    Ok((0..y.cols()).map(|c| (0..y.rows()).map(|r| y.get(r, c)).sum()).collect())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        (
            "one 3-edge vs triangle",
            IncidenceStructure::build(3, &[vec![0, 1, 2]])?,
            IncidenceStructure::build(3, &[vec![0, 1], vec![1, 2], vec![0, 2]])?,
        ),
        (
            "two triangles vs hexagon",
            IncidenceStructure::build(6, &[vec![0, 1], vec![1, 2], vec![0, 2], vec![3, 4], vec![4, 5], vec![3, 5]])?,
            IncidenceStructure::build(6, &[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![0, 5]])?,
        ),
    ];
    for (label, a, b) in &pairs {
        println!("{label}: 1-GWL distinguishes = {}", distinguish(a, b, 100).verdict == Verdict::Distinguishable);
        for variant in Variant::ALL {
            let mut spec = ModelSpec::new(variant, 2, 3);
            spec.hidden_dim = 8;
            spec.heads = 2;
            spec.use_norm = false;
            let model = Model::<f64>::new(spec)?;
            let (ra, rb) = (readout(&model, a)?, readout(&model, b)?);
            let gap = ra.iter().zip(&rb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            println!("  {variant:<12} max readout gap {gap:.3e}");
        }
    }
    Ok(())
}
