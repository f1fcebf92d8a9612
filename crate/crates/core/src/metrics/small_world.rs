use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Connectome;
use crate::metrics::centrality::{characteristic_path_length, clustering_coefficient, is_connected};

/// Surrogate graphs per small-worldness estimate.
pub const SURROGATES: usize = 10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Null-model surrogates: the upper-triangle weights dealt uniformly at random
/// over all node pairs.
///
/// The weights are sorted before shuffling, so the surrogates depend only on
/// the weight multiset and the seed, never on node labels.
pub fn surrogates(w: &Connectome, count: usize, seed: u64) -> Vec<Connectome> {
    let n = w.n();
    let mut pool = w.upper_tri_vectorize();
    pool.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v = pool.clone();
            v.shuffle(&mut rng);
            Connectome::devectorize(&v, n).expect("shuffled weights stay valid")
        })
        .collect()
}

/// `sigma = (C / C_rand) / (L / L_rand)` over [`SURROGATES`] seeded surrogates.
pub fn small_worldness(w: &Connectome, seed: u64) -> Result<f64> {
    if w.n() < 3 {
        return Err(Error::Domain(format!("small-worldness needs n >= 3, got {}", w.n())));
    }
    if !is_connected(w) {
        return Err(Error::Domain("graph is disconnected after thresholding".into()));
    }
    let c = mean(&clustering_coefficient(w));
    let l = characteristic_path_length(w).expect("connected graph has finite paths");
    let mut c_rand = 0.0;
    let mut l_rand = 0.0;
    for s in surrogates(w, SURROGATES, seed) {
        c_rand += mean(&clustering_coefficient(&s));
        l_rand += characteristic_path_length(&s).unwrap_or(0.0);
    }
    c_rand /= SURROGATES as f64;
    l_rand /= SURROGATES as f64;
    if c_rand == 0.0 || l_rand == 0.0 {
        return Err(Error::Domain(format!(
            "degenerate null model: C_rand = {c_rand}, L_rand = {l_rand}"
        )));
    }
    Ok((c / c_rand) / (l / l_rand))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ring lattice on 20 nodes, each joined to its 2 nearest neighbours per side.
    pub(crate) fn ring_with_shortcuts() -> Connectome {
        let n = 20;
        let mut edges = Vec::new();
        for i in 0..n {
            for k in 1..=2 {
                edges.push((i, (i + k) % n, 1.0));
            }
        }
        edges.push((0, 10, 1.0));
        edges.push((5, 15, 1.0));
        Connectome::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn constant_weights_give_one() {
        let w = Connectome::complete(7, 0.4).unwrap();
        assert_eq!(small_worldness(&w, 1).unwrap(), 1.0);
    }

    #[test]
    fn deterministic() {
        let w = ring_with_shortcuts();
        assert_eq!(small_worldness(&w, 5).unwrap(), small_worldness(&w, 5).unwrap());
    }

    #[test]
    fn ring_with_shortcuts_is_small_world() {
        let sigma = small_worldness(&ring_with_shortcuts(), 0).unwrap();
        assert!(sigma > 1.0, "sigma = {sigma}");
    }

    #[test]
    fn surrogates_preserve_weights() {
        let w = ring_with_shortcuts();
        let mut a = w.upper_tri_vectorize();
        a.sort_by(f64::total_cmp);
        for s in surrogates(&w, 3, 9) {
            let mut b = s.upper_tri_vectorize();
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn disconnected_is_error() {
        let w = Connectome::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(small_worldness(&w, 0), Err(Error::Domain(_))));
    }
}
