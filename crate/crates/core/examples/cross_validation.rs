//! Three-fold cross-validation of all three models with the eight-metric report.
//!
//! cargo run --release --example cross_validation -- 20

use stpgsr::data::{generate_synthetic, SyntheticConfig};
use stpgsr::metrics::METRIC_NAMES;
use stpgsr::models::{param_count, ModelKind};
use stpgsr::training::{cross_validate, TrainConfig};

fn main() -> stpgsr::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(20), |s| s.parse()).expect("epochs must be an integer");
    let samples = generate_synthetic(&SyntheticConfig::default())?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    print!("{:<12}", "model");
    METRIC_NAMES.iter().for_each(|m| print!(" {:>10.10}", m));
    println!(" {:>10}", "160->268");
    for kind in ModelKind::ALL {
        let cfg = TrainConfig { epochs, model_kind: kind, ..Default::default() };
        let (report, _) = cross_validate(&samples, &cfg, jobs)?;
        print!("{:<12}", kind.as_str());
        for m in METRIC_NAMES {
            match report.aggregate[m] {
                Some(v) => print!(" {v:>10.4}"),
                None => print!(" {:>10}", "null"),
            }
        }
        println!(" {:>9.3}M", param_count(kind, 160, 268) as f64 / 1e6);
    }
    Ok(())
}
