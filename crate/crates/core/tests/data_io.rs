use std::fs;
use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stpgsr::data::*;
use stpgsr::graph::{pair_count, Connectome};
use stpgsr::metrics::{detect_communities, evaluate_sample, MetricsReport};
use stpgsr::models::{Model, ModelKind};
use stpgsr::training::TrainConfig;
use stpgsr::Error;

fn random(n: usize, seed: u64) -> Connectome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..pair_count(n)).map(|_| rng.gen()).collect();
    Connectome::devectorize(&v, n).unwrap()
}

#[test]
fn zero_matrix_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.csv");
    write_matrix(&Connectome::zeros(2), &path).unwrap();
    assert_eq!(read_matrix(&path).unwrap(), Connectome::zeros(2));
}

#[test]
fn asymmetric_file_names_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    fs::write(&path, "0,0.5,0\n0.5,0,0.25\n0,0.75,0\n").unwrap();
    let err = read_matrix(&path).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert!(err.to_string().contains("(1, 2)"), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(read_matrix(std::path::Path::new("/nonexistent/m.csv")), Err(Error::Io { .. })));
}

#[test]
fn large_matrix_parses_within_budget() {
    let c = random(268, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.csv");
    write_matrix(&c, &path).unwrap();
    let start = Instant::now();
    let back = read_matrix(&path).unwrap();
    let took = start.elapsed();
    assert_eq!(back, c);
    assert!(took.as_secs_f64() < 1.0, "{took:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn text_round_trip_is_bitwise(n in 2usize..16, v in prop::collection::vec(0.0f64..1e6, 120)) {
        let c = Connectome::devectorize(&v[..pair_count(n)], n).unwrap();
        let back = parse_matrix(&render_matrix(&c), "p").unwrap();
        prop_assert!(c.weights().iter().zip(back.weights()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn dataset_round_trip_and_byte_identical_regeneration() {
    let cfg = SyntheticConfig { samples: 3, seed: 11, ..Default::default() };
    let samples = generate_synthetic(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let manifest = write_dataset(&samples, cfg.seed, "synthetic", Some(cfg.clone()), a.path()).unwrap();
    write_dataset(&generate_synthetic(&cfg).unwrap(), cfg.seed, "synthetic", Some(cfg.clone()), b.path()).unwrap();
    assert_eq!(fs::read_dir(a.path()).unwrap().count(), 2 * 3 + 1);
    for r in &manifest.samples {
        for f in [&r.lr, &r.hr] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }
    let (loaded_manifest, loaded) = load_dataset(&a.path().join("manifest.json")).unwrap();
    assert_eq!(loaded_manifest, manifest);
    assert_eq!(loaded, samples);
}

#[test]
fn loading_rejects_invalid_or_missized_files() {
    let cfg = SyntheticConfig { samples: 2, seed: 1, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&generate_synthetic(&cfg).unwrap(), 1, "synthetic", None, dir.path()).unwrap();
    let mpath = dir.path().join("manifest.json");

    let hr = dir.path().join(&manifest.samples[0].hr);
    let good = fs::read_to_string(&hr).unwrap();
    fs::write(&hr, good.replacen("0.0000000000000000e0", "1.0", 1)).unwrap();
    assert!(matches!(load_dataset(&mpath), Err(Error::Validation(_))));
    fs::write(&hr, &good).unwrap();

    let mut wrong = manifest.clone();
    wrong.n_t = 31;
    write_json(&wrong, &mpath).unwrap();
    assert!(matches!(load_dataset(&mpath), Err(Error::Validation(_))));
}

#[test]
fn checkpoint_round_trip_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = random(6, 2);
    for kind in ModelKind::ALL {
        let mut m = Model::new(kind, 6, 8, 13).unwrap();
        for p in m.params.iter_mut() {
            p.tensor.data_mut().iter_mut().for_each(|x| *x *= 1.0 + 1.0 / 3.0);
        }
        let cfg = TrainConfig { model_kind: kind, seed: 13, ..Default::default() };
        let path = dir.path().join(format!("{kind}.json"));
        write_checkpoint(&m, Some(&cfg), &path).unwrap();
        let (back, cp) = read_checkpoint(&path).unwrap();
        assert_eq!(cp.config, Some(cfg));
        assert_eq!(back.predict_all(&a).unwrap(), m.predict_all(&a).unwrap());
    }
}

#[test]
fn checkpoint_size_mismatch_is_explicit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.json");
    write_checkpoint(&Model::new(ModelKind::DirectSr, 6, 8, 0).unwrap(), None, &path).unwrap();
    let mut cp: Checkpoint = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    cp.n_t = 9;
    write_json(&cp, &path).unwrap();
    let err = read_checkpoint(&path).unwrap_err().to_string();
    assert!(err.contains("6 -> 9"), "{err}");

    fs::write(&path, "{\"format\": \"stpgsr-checkpoint\"}").unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Validation(_))));
}

#[test]
fn report_has_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let s = evaluate_sample("s0", &random(8, 1), &random(8, 2), 0).unwrap();
    let report = MetricsReport::new("stp_gsr", Some(1), vec![s]);
    let path = dir.path().join("report.json");
    write_report(&report, &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["aggregate", "aggregate_graph_mean", "fold", "model", "per_sample"]);
    assert_eq!(v["aggregate"].as_object().unwrap().len(), 8);
    assert!(dir.path().join("report.csv").exists());
}

/// Adjusted Rand index between two labelings.
fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = sum_a * sum_b / c2(a.len() as f64);
    (sum_ij - expected) / (0.5 * (sum_a + sum_b) - expected)
}

#[test]
fn planted_modules_are_recovered() {
    for seed in 0..5 {
        let cfg = SyntheticConfig { samples: 3, seed, ..Default::default() };
        let planted = module_labels(&cfg);
        for s in generate_synthetic(&cfg).unwrap() {
            let found = detect_communities(&s.hr, seed);
            let ari = adjusted_rand(&planted, found.assignment());
            assert!(ari > 0.7, "seed {seed} {}: ARI {ari}", s.id);
        }
    }
}
