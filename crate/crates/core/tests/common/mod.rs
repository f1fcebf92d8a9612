//! Helpers shared by the integration tests.
#![allow(dead_code)]

use stpgsr::graph::Connectome;
use stpgsr::metrics::EDGE_THRESHOLD;

/// Betweenness by enumerating every simple path; lengths are summed from the
/// source in path order so exact ties are detected exactly.
pub fn betweenness_by_enumeration(w: &Connectome) -> Vec<f64> {
    let n = w.n();
    fn walk(w: &Connectome, path: &mut Vec<usize>, len: f64, t: usize, out: &mut Vec<(f64, Vec<usize>)>) {
        let u = *path.last().unwrap();
        if u == t {
            out.push((len, path.clone()));
            return;
        }
        for v in 0..w.n() {
            let x = w.get(u, v);
            if x >= EDGE_THRESHOLD && !path.contains(&v) {
                path.push(v);
                walk(w, path, len + 1.0 / x, t, out);
                path.pop();
            }
        }
    }
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths = Vec::new();
            walk(w, &mut vec![s], 0.0, t, &mut paths);
            let Some(best) = paths.iter().map(|p| p.0).min_by(f64::total_cmp) else {
                continue;
            };
            let shortest: Vec<_> = paths.iter().filter(|p| p.0 == best).collect();
            for v in 0..n {
                if v != s && v != t {
                    let through = shortest.iter().filter(|p| p.1.contains(&v)).count();
                    bc[v] += through as f64 / shortest.len() as f64;
                }
            }
        }
    }
    let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
    bc.into_iter().map(|b| b / norm).collect()
}

pub fn graph_from_mask(n: usize, mask: u64, weights: &[f64]) -> Connectome {
    let mut edges = Vec::new();
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if mask >> bit & 1 == 1 {
                edges.push((i, j, weights[bit]));
            }
            bit += 1;
        }
    }
    Connectome::from_edges(n, &edges).unwrap()
}

/// `out[perm[i]] = v[i]`.
pub fn permute(v: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = v[i];
    }
    out
}
