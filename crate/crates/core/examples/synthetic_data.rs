//! Generate a planted-modular dataset, write it to disk and load it back.

use stpgsr::data::{generate_synthetic, load_dataset, module_labels, write_dataset, SyntheticConfig};

fn main() -> stpgsr::Result<()> {
    let cfg = SyntheticConfig { samples: 4, noise: 0.05, ..Default::default() };
    let samples = generate_synthetic(&cfg)?;
    println!("HR modules {:?}", module_labels(&cfg));
    for s in &samples {
        let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
        println!("{}  lr mean {:.3}  hr mean {:.3}  hash {}", s.id, mean(s.lr.weights()), mean(s.hr.weights()), &s.content_hash()[..12]);
    }
    let dir = tempfile::tempdir().expect("temp dir");
    write_dataset(&samples, cfg.seed, "synthetic", Some(cfg), dir.path())?;
    let (manifest, loaded) = load_dataset(&dir.path().join("manifest.json"))?;
    println!("reloaded {} samples, {} -> {} nodes, identical: {}", manifest.samples.len(), manifest.n_s, manifest.n_t, loaded == samples);
    Ok(())
}
