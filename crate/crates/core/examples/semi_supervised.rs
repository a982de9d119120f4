//! Transductive node classification on a generated planted-partition
//! hypergraph, for every model variant.

use unignn::layers::{ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{format_table, grid, sweep, SweepProtocol, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = planted_partition(&SyntheticConfig::default());
    println!(
        "{}: {} vertices, {} hyperedges, {} features, {} classes",
        bundle.name,
        bundle.num_vertices(),
        bundle.hypergraph.num_edges(),
        bundle.feature_dim(),
        bundle.num_classes
    );
    let runs = grid(&["0".into(), "1".into()], &[1, 2]);
    let mut reports = Vec::new();
    for variant in Variant::ALL {
        let mut config = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
        if variant == Variant::UniGcnii {
            // a shorter budget than the reference keeps the example quick
            config.epochs = 300;
            config.patience = 100;
        }
        reports.push(sweep::<f32>(&bundle, &config, SweepProtocol::Transductive, &runs, 4)?);
    }
    print!("{}", format_table(&reports));
    Ok(())
}
