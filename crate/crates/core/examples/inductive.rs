//! Inductive protocol: 40% of vertices are hidden during training, the model
//! is fit on the induced hypergraph and then scored on the full one.

use unignn::layers::{ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{format_table, grid, sweep, SweepProtocol, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = planted_partition(&SyntheticConfig::default());
    let protocol = SweepProtocol::Inductive {
        unseen_fraction: 0.4,
        train_fraction: 0.2,
    };
    let runs = grid(&["0".into(), "1".into(), "2".into()], &[1]);
    let mut reports = Vec::new();
    for variant in [Variant::UniGcn, Variant::UniGat, Variant::UniSage] {
        let config = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
        let report = sweep::<f32>(&bundle, &config, protocol, &runs, 3)?;
        let s = &report.summary;
        println!(
            "{variant}: seen {:.1}%, unseen {:.1}%",
            100.0 * s.seen.as_ref().map_or(f64::NAN, |m| m.mean),
            100.0 * s.unseen.as_ref().map_or(f64::NAN, |m| m.mean)
        );
        reports.push(report);
    }
    print!("{}", format_table(&reports));
    Ok(())
}
