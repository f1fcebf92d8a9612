use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::Connectome;

/// Weights below this are treated as absent edges.
pub const EDGE_THRESHOLD: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 1000;

/// Adjacency lists of the edges surviving [`EDGE_THRESHOLD`].
pub(crate) fn neighbours(w: &Connectome) -> Vec<Vec<(usize, f64)>> {
    let n = w.n();
    (0..n)
        .map(|i| {
            w.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &v)| j != i && v >= EDGE_THRESHOLD)
                .map(|(j, &v)| (j, v))
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source shortest paths with edge length `1 / w`.
///
/// Returns distances, shortest-path counts, predecessor lists and the order
/// in which nodes were settled (non-decreasing distance).
struct Sssp {
    dist: Vec<f64>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Sssp {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    sigma[source] = 1.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if settled[u] || d > dist[u] {
            continue;
        }
        settled[u] = true;
        order.push(u);
        for &(v, w) in &adj[u] {
            if settled[v] {
                continue;
            }
            let alt = d + 1.0 / w;
            if alt < dist[v] {
                dist[v] = alt;
                sigma[v] = sigma[u];
                preds[v].clear();
                preds[v].push(u);
                heap.push(Reverse((Dist(alt), v)));
            } else if alt == dist[v] {
                sigma[v] += sigma[u];
                preds[v].push(u);
            }
        }
    }
    Sssp {
        dist,
        sigma,
        preds,
        order,
    }
}

/// Weighted strength normalised by `n - 1`.
pub fn degree_centrality(w: &Connectome) -> Result<Vec<f64>> {
    let n = w.n();
    if n < 2 {
        return Err(Error::Domain(format!("degree centrality needs n >= 2, got {n}")));
    }
    Ok(neighbours(w)
        .iter()
        .map(|nb| nb.iter().map(|&(_, v)| v).sum::<f64>() / (n - 1) as f64)
        .collect())
}

/// All-pairs distances with edge length `1 / w`; unreachable pairs are `+inf`.
pub fn shortest_path_matrix(w: &Connectome) -> Vec<Vec<f64>> {
    let adj = neighbours(w);
    (0..w.n()).map(|s| dijkstra(&adj, s).dist).collect()
}

/// Brandes betweenness on `1 / w` distances, normalised by `(n - 1)(n - 2) / 2`.
pub fn betweenness_centrality(w: &Connectome) -> Result<Vec<f64>> {
    let n = w.n();
    if n < 3 {
        return Err(Error::Domain(format!("betweenness needs n >= 3, got {n}")));
    }
    let adj = neighbours(w);
    let mut bc = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for s in 0..n {
        let sp = dijkstra(&adj, s);
        delta.iter_mut().for_each(|d| *d = 0.0);
        for &v in sp.order.iter().rev() {
            for &u in &sp.preds[v] {
                delta[u] += sp.sigma[u] / sp.sigma[v] * (1.0 + delta[v]);
            }
            if v != s {
                bc[v] += delta[v];
            }
        }
    }
    // Each unordered pair was counted from both ends.
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    Ok(bc.into_iter().map(|b| b * scale).collect())
}

/// Closeness scaled by the reachable fraction: `(r / sum d) * (r / (n - 1))`.
pub fn closeness_centrality(w: &Connectome) -> Vec<f64> {
    let n = w.n();
    let adj = neighbours(w);
    (0..n)
        .map(|s| {
            let dist = dijkstra(&adj, s).dist;
            let (reach, total) = dist
                .iter()
                .enumerate()
                .filter(|&(j, d)| j != s && d.is_finite())
                .fold((0usize, 0.0), |(r, t), (_, d)| (r + 1, t + d));
            if reach == 0 || total <= 0.0 || n < 2 {
                0.0
            } else {
                let r = reach as f64;
                (r / total) * (r / (n - 1) as f64)
            }
        })
        .collect()
}

/// Dominant eigenvector of `W`, unit L2 norm, nonnegative.
///
/// Iterates on `W + s I` with `s` the mean strength, which shares the
/// eigenvectors of `W` but keeps bipartite graphs from oscillating.
pub fn eigenvector_centrality(w: &Connectome) -> Result<Vec<f64>> {
    let n = w.n();
    let adj = neighbours(w);
    let total: f64 = adj.iter().flatten().map(|&(_, v)| v).sum();
    if n == 0 || total == 0.0 {
        return Err(Error::Domain("eigenvector centrality of a zero matrix".into()));
    }
    let shift = total / n as f64;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITER {
        for i in 0..n {
            next[i] = shift * v[i] + adj[i].iter().map(|&(j, x)| x * v[j]).sum::<f64>();
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        change = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if change < EIGEN_TOL {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence {
        iterations: EIGEN_MAX_ITER,
        change,
        iterate: v,
    })
}

/// Onnela weighted clustering with weights scaled by the global maximum.
pub fn clustering_coefficient(w: &Connectome) -> Vec<f64> {
    let n = w.n();
    let adj = neighbours(w);
    let max = adj
        .iter()
        .flatten()
        .map(|&(_, v)| v)
        .fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0; n];
    }
    let cube: Vec<f64> = w
        .weights()
        .iter()
        .map(|&v| if v >= EDGE_THRESHOLD { (v / max).cbrt() } else { 0.0 })
        .collect();
    (0..n)
        .map(|i| {
            let k = adj[i].len();
            if k < 2 {
                return 0.0;
            }
            let mut total = 0.0;
            for (a, &(j, _)) in adj[i].iter().enumerate() {
                for &(h, _) in &adj[i][a + 1..] {
                    total += cube[i * n + j] * cube[i * n + h] * cube[j * n + h];
                }
            }
            // Unordered pairs, so 2 * total / (k (k - 1)).
            2.0 * total / (k * (k - 1)) as f64
        })
        .collect()
}

/// Mean finite shortest-path distance over ordered pairs; `None` if no pair is connected.
pub fn characteristic_path_length(w: &Connectome) -> Option<f64> {
    let d = shortest_path_matrix(w);
    let (count, total) = d
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |&(j, _)| j != i))
        .filter(|(_, v)| v.is_finite())
        .fold((0usize, 0.0), |(c, t), (_, v)| (c + 1, t + v));
    (count > 0).then(|| total / count as f64)
}

pub fn is_connected(w: &Connectome) -> bool {
    let n = w.n();
    if n == 0 {
        return true;
    }
    let adj = neighbours(w);
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
