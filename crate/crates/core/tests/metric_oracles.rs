use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use stpgsr::graph::{pair_count, Connectome};
use stpgsr::metrics::*;

mod common;
use common::{betweenness_by_enumeration, graph_from_mask, permute};

#[derive(Deserialize)]
struct Reference {
    graphs: Vec<RefGraph>,
    ring: RingRef,
}

#[derive(Deserialize)]
struct RefGraph {
    weights: Vec<Vec<f64>>,
    betweenness: Vec<f64>,
    closeness: Vec<f64>,
    eigenvector: Vec<f64>,
    clustering: Vec<f64>,
}

#[derive(Deserialize)]
struct RingRef {
    clustering: f64,
    path_length: f64,
    sigma: f64,
}

fn reference() -> Reference {
    let text = include_str!("fixtures/networkx_reference.json");
    serde_json::from_str(text).unwrap()
}

fn assert_close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() < tol, "{what}[{i}]: {g} vs {w}");
    }
}

#[test]
fn matches_networkx_reference() {
    for (k, g) in reference().graphs.iter().enumerate() {
        let w = Connectome::from_rows(&g.weights).unwrap();
        assert_close(&betweenness_centrality(&w).unwrap(), &g.betweenness, 1e-6, &format!("betweenness {k}"));
        assert_close(&closeness_centrality(&w), &g.closeness, 1e-6, &format!("closeness {k}"));
        assert_close(&eigenvector_centrality(&w).unwrap(), &g.eigenvector, 1e-6, &format!("eigenvector {k}"));
        assert_close(&clustering_coefficient(&w), &g.clustering, 1e-6, &format!("clustering {k}"));
    }
}

fn ring_with_shortcuts() -> Connectome {
    let mut edges = Vec::new();
    for i in 0..20 {
        for k in 1..=2 {
            edges.push((i, (i + k) % 20, 1.0));
        }
    }
    edges.extend([(0, 10, 1.0), (5, 15, 1.0)]);
    Connectome::from_edges(20, &edges).unwrap()
}

#[test]
fn ring_small_world_agrees_with_reference() {
    let r = reference().ring;
    let w = ring_with_shortcuts();
    let c = clustering_coefficient(&w).iter().sum::<f64>() / 20.0;
    assert!((c - r.clustering).abs() < 1e-12);
    assert!((characteristic_path_length(&w).unwrap() - r.path_length).abs() < 1e-12);
    let sigma = small_worldness(&w, 0).unwrap();
    assert!(sigma > 1.0 && r.sigma > 1.0, "sigma {sigma}, reference {}", r.sigma);
}

#[test]
fn brandes_matches_enumeration_on_every_small_graph() {
    for n in 3..=5 {
        let pairs = pair_count(n);
        let ones = vec![1.0; pairs];
        for mask in 0..(1u64 << pairs) {
            let w = graph_from_mask(n, mask, &ones);
            assert_close(&betweenness_centrality(&w).unwrap(), &betweenness_by_enumeration(&w), 1e-12, &format!("n={n} mask={mask}"));
        }
    }
}

#[test]
fn brandes_matches_enumeration_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    // Dyadic weights make many equal-length paths with exact sums.
    let palette = [1.0, 0.5, 0.25];
    for trial in 0..300 {
        let n = rng.gen_range(6..=7);
        let pairs = pair_count(n);
        let mask = rng.gen_range(0..(1u64 << pairs));
        let weights: Vec<f64> = (0..pairs)
            .map(|_| if trial % 2 == 0 { *palette.choose(&mut rng).unwrap() } else { rng.gen_range(0.05..1.0) })
            .collect();
        let w = graph_from_mask(n, mask, &weights);
        assert_close(&betweenness_centrality(&w).unwrap(), &betweenness_by_enumeration(&w), 1e-12, &format!("trial {trial}"));
    }
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Connectome> {
    (3..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], pair_count(n))
            .prop_map(move |v| Connectome::devectorize(&v, n).unwrap())
    })
}

fn arb_graph_with_perm(max_n: usize) -> impl Strategy<Value = (Connectome, Vec<usize>)> {
    arb_graph(max_n).prop_flat_map(|w| {
        let n = w.n();
        (Just(w), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measures_are_permutation_equivariant((w, perm) in arb_graph_with_perm(12), seed in 0u64..100) {
        let pw = w.permuted(&perm);
        let partition = detect_communities(&w, seed);
        let mut labels = vec![0; w.n()];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = partition.community_of(i);
        }
        let ppart = Partition::from_labels(&labels);
        let base = topological_measures(&w, &partition, seed);
        let moved = topological_measures(&pw, &ppart, seed);
        for (name, v) in &base {
            match (v, &moved[name]) {
                (Ok(a), Ok(b)) => {
                    let want = if *name == "small_worldness" { a.clone() } else { permute(a, &perm) };
                    for (x, y) in want.iter().zip(b) {
                        prop_assert!((x - y).abs() < 1e-9, "{}: {} vs {}", name, x, y);
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "{} failed on only one side", name),
            }
        }
    }

    #[test]
    fn eigenvector_residual_is_small(w in arb_graph(16)) {
        if let Ok(v) = eigenvector_centrality(&w) {
            let n = w.n();
            let wv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(i, j) * v[j]).sum()).collect();
            let lambda: f64 = v.iter().zip(&wv).map(|(a, b)| a * b).sum();
            let residual = wv.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            prop_assert!(residual < 1e-8 * lambda, "residual {} lambda {}", residual, lambda);
            prop_assert!(v.iter().all(|&x| x >= 0.0));
            prop_assert!(((v.iter().map(|x| x * x).sum::<f64>()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measures_stay_in_range(w in arb_graph(12), seed in 0u64..50) {
        let p = detect_communities(&w, seed);
        let m = p.count() as f64;
        for x in participation_coefficient(&w, &p).unwrap() {
            prop_assert!((0.0..=1.0 - 1.0 / m + 1e-12).contains(&x));
        }
        for x in clustering_coefficient(&w) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&x));
        }
        if is_connected(&w) {
            for f in [betweenness_centrality(&w).unwrap(), closeness_centrality(&w), degree_centrality(&w).unwrap()] {
                prop_assert!(f.iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)), "{:?}", f);
            }
        }
    }
}

#[test]
fn eigenvector_matches_dense_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..50 {
        let n = rng.gen_range(3..=20);
        // Dense positive weights: connected, so the Perron vector is unique.
        let v: Vec<f64> = (0..pair_count(n)).map(|_| rng.gen_range(0.05..1.0)).collect();
        let w = Connectome::devectorize(&v, n).unwrap();
        let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_row_slice(n, n, w.weights()));
        let top = eig.eigenvalues.imax();
        let mut want: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        if want.iter().sum::<f64>() < 0.0 {
            want.iter_mut().for_each(|x| *x = -*x);
        }
        assert_close(&eigenvector_centrality(&w).unwrap(), &want, 1e-8, &format!("trial {trial}"));
    }
}
