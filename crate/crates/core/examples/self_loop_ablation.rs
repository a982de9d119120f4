//! UniGCN and UniGAT trained with and without the singleton hyperedge
//! `{i}` added for every vertex.

use unignn::layers::{ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{format_table, grid, self_loop_ablation, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = planted_partition(&SyntheticConfig::default());
    let runs = grid(&["0".into(), "1".into()], &[1, 2]);
    let mut reports = Vec::new();
    for variant in [Variant::UniGcn, Variant::UniGat] {
        let config = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
        let (with, without) = self_loop_ablation::<f32>(&bundle, &config, &runs, 4)?;
        reports.push(with);
        reports.push(without);
    }
    print!("{}", format_table(&reports));
    Ok(())
}
