//! Accuracy against depth for UniGCN and UniGCNII, with 20% of each test
//! split held out for validation and an OOM budget on the estimated tape.

use unignn::layers::{ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{depth_sweep, grid, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = planted_partition(&SyntheticConfig::default());
    let mut bases = Vec::new();
    for variant in [Variant::UniGcn, Variant::UniGcnii] {
        let mut c = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
        if variant == Variant::UniGcnii {
            c.epochs = 300;
            c.patience = 100;
        }
        bases.push(c);
    }
    let runs = grid(&["0".into(), "1".into()], &[1]);
    let budget = 256 << 20;
    for cell in depth_sweep::<f32>(&bundle, &bases, &[2, 4, 8, 16], &runs, 4, budget)? {
        match (&cell.report, &cell.failure) {
            (Some(r), _) => println!(
                "{:<10} L={:<3} {:.1} ± {:.1}",
                cell.variant,
                cell.depth,
                100.0 * r.summary.test.mean,
                100.0 * r.summary.test.std
            ),
            (None, Some(f)) => println!("{:<10} L={:<3} {f}", cell.variant, cell.depth),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}
