//! Save a trained model and restore it with identical predictions.

use stpgsr::data::{generate_synthetic, read_checkpoint, write_checkpoint, SyntheticConfig};
use stpgsr::models::{Model, ModelKind};
use stpgsr::training::{train, TrainConfig};

fn main() -> stpgsr::Result<()> {
    let samples = generate_synthetic(&SyntheticConfig { samples: 6, n_s: 8, n_t: 12, ..Default::default() })?;
    let cfg = TrainConfig { epochs: 5, model_kind: ModelKind::Autoencoder, ..Default::default() };
    let mut model = Model::new(cfg.model_kind, 8, 12, cfg.seed)?;
    train(&mut model, &samples, &cfg)?;

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("checkpoint.json");
    write_checkpoint(&model, Some(&cfg), &path)?;
    let (restored, cp) = read_checkpoint(&path)?;
    println!("{} params in {} arrays, {} bytes on disk", restored.num_params(), cp.params.len(), std::fs::metadata(&path).map_or(0, |m| m.len()));
    println!("same prediction: {}", restored.predict(&samples[0].lr)? == model.predict(&samples[0].lr)?);
    Ok(())
}
