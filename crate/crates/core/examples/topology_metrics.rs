//! Topological measures, communities and small-worldness of one connectome.

use stpgsr::data::{generate_synthetic, SyntheticConfig};
use stpgsr::metrics::{detect_communities, modularity, small_worldness, topological_measures};

fn main() -> stpgsr::Result<()> {
    let sample = generate_synthetic(&SyntheticConfig { samples: 1, ..Default::default() })?.remove(0);
    let w = &sample.hr;
    let partition = detect_communities(w, 0);
    println!("{} communities, Q = {:.4}", partition.count(), modularity(w, &partition)?);
    println!("labels {:?}", partition.assignment());
    for (name, values) in topological_measures(w, &partition, 0) {
        match values {
            Ok(v) => {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                println!("{name:<16} mean {mean:.4}  first {:.4}", v[0]);
            }
            Err(e) => println!("{name:<16} undefined: {e}"),
        }
    }
    println!("sigma = {:.4}", small_worldness(w, 0)?);
    Ok(())
}
