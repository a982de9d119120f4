//! Train, save weights as a raw blob plus JSON manifest, reload in another
//! precision and evaluate.

use unignn::layers::{Model, ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{evaluate, train_transductive, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = planted_partition(&SyntheticConfig::default());
    let config = TrainConfig::reference(ModelSpec::new(Variant::UniGat, bundle.feature_dim(), bundle.num_classes));
    let run = train_transductive::<f32>(&bundle, &config)?;
    println!("trained: test accuracy {:.1}%", 100.0 * run.record.test_accuracy);

    let dir = std::env::temp_dir().join("unignn-weights-example");
    std::fs::create_dir_all(&dir)?;
    let (blob, manifest) = (dir.join("model.bin"), dir.join("model.json"));
    run.model.save(&blob, &manifest)?;
    println!("saved {} scalars to {}", run.model.num_scalars(), blob.display());

    let reloaded = Model::<f64>::load(&blob, &manifest)?;
    let test = &bundle.split("0")?.test;
    println!("reloaded as f64: test accuracy {:.1}%", 100.0 * evaluate(&reloaded, &bundle, test)?);
    Ok(())
}
