//! Line-graph (dual) construction.
//!
//! Each primal edge becomes a dual node; two dual nodes are adjacent iff the
//! primal edges share an endpoint. Construction walks the incidence list of
//! every primal vertex, so a dual edge is produced once per shared vertex and
//! no `m x m` storage is ever allocated.

use std::collections::{HashMap, HashSet};

use super::connectome::pair_count;
use crate::error::{Error, Result};

/// Position of the pair `(i, j)`, `i < j`, in the row-major enumeration of
/// the strict upper triangle of an `n x n` matrix.
pub fn dual_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(Error::Domain(format!(
            "dual_index needs 0 <= i < j < n, got ({i}, {j}) with n = {n}"
        )));
    }
    Ok(i * n - i * (i + 1) / 2 + (j - i - 1))
}

/// Inverse of [`dual_index`].
pub fn dual_pair(r: usize, n: usize) -> Result<(usize, usize)> {
    if r >= pair_count(n) {
        return Err(Error::Domain(format!("dual node {r} out of range for n = {n}")));
    }
    let mut start = 0;
    for i in 0..n {
        let row = n - i - 1;
        if r < start + row {
            return Ok((i, i + 1 + r - start));
        }
        start += row;
    }
    unreachable!("r < pair_count(n)")
}

#[derive(Clone, Debug)]
enum IndexMap {
    /// Closed-form [`dual_index`] over all pairs of `n` nodes.
    Complete,
    Lookup(HashMap<(u32, u32), u32>),
}

/// Dual graph of a primal edge set, with the primal-edge <-> dual-node maps.
#[derive(Clone, Debug)]
pub struct DualTopology {
    n_primal: usize,
    nodes: Vec<(u32, u32)>,
    edges: Vec<(u32, u32)>,
    directed: bool,
    index: IndexMap,
}

impl DualTopology {
    pub fn n_primal(&self) -> usize {
        self.n_primal
    }

    /// Dual node count.
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// Undirected dual edges `(r, c)` with `r < c`, each listed once.
    pub fn dual_edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Primal edge represented by dual node `r`.
    pub fn edge_of(&self, r: usize) -> Option<(usize, usize)> {
        self.nodes.get(r).map(|&(i, j)| (i as usize, j as usize))
    }

    /// Dual node representing the primal edge `(i, j)`.
    ///
    /// Undirected topologies accept either orientation.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let key = if self.directed { (i, j) } else { (i.min(j), i.max(j)) };
        match &self.index {
            IndexMap::Complete => dual_index(key.0, key.1, self.n_primal).ok(),
            IndexMap::Lookup(map) => map.get(&(key.0 as u32, key.1 as u32)).map(|&r| r as usize),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.m()];
        for &(r, c) in &self.edges {
            deg[r as usize] += 1;
            deg[c as usize] += 1;
        }
        deg
    }

    /// Fraction of the `m (m - 1) / 2` possible dual pairs that are edges.
    pub fn density(&self) -> f64 {
        let possible = pair_count(self.m());
        if possible == 0 {
            0.0
        } else {
            self.edges.len() as f64 / possible as f64
        }
    }

    /// Bytes held by the dual edge list.
    pub fn edge_bytes(&self) -> usize {
        self.edges.len() * std::mem::size_of::<(u32, u32)>()
    }
}

/// Dual of the complete graph `K_n`, dual nodes ordered as [`dual_index`].
pub fn build_dual_complete(n: usize) -> Result<DualTopology> {
    if n < 2 {
        return Err(Error::Domain(format!("dual of K_n needs n >= 2, got {n}")));
    }
    if pair_count(n) > u32::MAX as usize {
        return Err(Error::Domain(format!("n = {n} too large for 32-bit dual indices")));
    }
    let mut nodes = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            nodes.push((i as u32, j as u32));
        }
    }
    // Every dual edge shares exactly one primal vertex, so each is emitted once.
    let mut edges = Vec::with_capacity(n * (n - 1) * n.saturating_sub(2) / 2);
    let mut incident = Vec::with_capacity(n - 1);
    for v in 0..n {
        incident.clear();
        for u in 0..n {
            if u != v {
                incident.push(dual_index(u.min(v), u.max(v), n)? as u32);
            }
        }
        for a in 0..incident.len() {
            for b in a + 1..incident.len() {
                let (r, c) = (incident[a], incident[b]);
                edges.push((r.min(c), r.max(c)));
            }
        }
    }
    Ok(DualTopology {
        n_primal: n,
        nodes,
        edges,
        directed: false,
        index: IndexMap::Complete,
    })
}

/// Dual of an undirected simple graph given by its edge list.
///
/// Dual node `r` is the `r`-th edge of the input, stored as `(min, max)`.
pub fn build_dual_undirected(n: usize, edges: &[(usize, usize)]) -> Result<DualTopology> {
    let mut seen = HashSet::with_capacity(edges.len());
    let mut nodes = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        if i == j {
            return Err(Error::Validation(format!("self-loop at node {i}")));
        }
        if i >= n || j >= n {
            return Err(Error::Validation(format!("edge ({i}, {j}) out of range for n = {n}")));
        }
        let key = (i.min(j) as u32, i.max(j) as u32);
        if !seen.insert(key) {
            return Err(Error::Validation(format!("duplicate edge ({i}, {j})")));
        }
        nodes.push(key);
    }
    let edges = incidence_pairs(n, &nodes);
    let index = nodes
        .iter()
        .enumerate()
        .map(|(r, &k)| (k, r as u32))
        .collect();
    Ok(DualTopology {
        n_primal: n,
        nodes,
        edges,
        directed: false,
        index: IndexMap::Lookup(index),
    })
}

/// Dual of a simple digraph: one dual node per arc, adjacent iff the arcs
/// share an endpoint. A complete digraph yields `n (n - 1)` dual nodes.
pub fn build_dual_directed(arcs: &[(usize, usize)]) -> Result<DualTopology> {
    let n = arcs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
    let mut seen = HashSet::with_capacity(arcs.len());
    let mut nodes = Vec::with_capacity(arcs.len());
    for &(i, j) in arcs {
        if i == j {
            return Err(Error::Validation(format!("self-loop at node {i}")));
        }
        if !seen.insert((i, j)) {
            return Err(Error::Validation(format!("duplicate arc ({i}, {j})")));
        }
        nodes.push((i as u32, j as u32));
    }
    let edges = incidence_pairs(n, &nodes);
    let index = nodes
        .iter()
        .enumerate()
        .map(|(r, &k)| (k, r as u32))
        .collect();
    Ok(DualTopology {
        n_primal: n,
        nodes,
        edges,
        directed: true,
        index: IndexMap::Lookup(index),
    })
}

/// Dual edges from vertex incidence lists. Antiparallel arcs share both
/// endpoints; their pair is emitted only at the smaller shared vertex.
fn incidence_pairs(n: usize, nodes: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (r, &(i, j)) in nodes.iter().enumerate() {
        incident[i as usize].push(r as u32);
        incident[j as usize].push(r as u32);
    }
    let mut edges = Vec::new();
    for (v, list) in incident.iter().enumerate() {
        for a in 0..list.len() {
            for b in a + 1..list.len() {
                let (r, c) = (list[a], list[b]);
                let (p, q) = (nodes[r as usize], nodes[c as usize]);
                let both = (p.0 == q.1 && p.1 == q.0) || p == q;
                if both && v as u32 != p.0.min(p.1) {
                    continue;
                }
                edges.push((r.min(c), r.max(c)));
            }
        }
    }
    edges
}

/// Reference line graph by testing every pair of primal edges, `O(m^2)`.
///
/// Returns `(r, c)`, `r < c`, indexing into `primal_edges`, sorted.
pub fn line_graph_bruteforce(primal_edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..primal_edges.len() {
        let (i, j) = primal_edges[r];
        for c in r + 1..primal_edges.len() {
            let (k, l) = primal_edges[c];
            if i == k || i == l || j == k || j == l {
                out.push((r, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(edges: &[(u32, u32)]) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = edges.iter().map(|&(a, b)| (a as usize, b as usize)).collect();
        v.sort_unstable();
        v
    }

    fn complete_edges(n: usize) -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    }

    #[test]
    fn dual_index_n4() {
        let expect = [((0, 1), 0), ((0, 2), 1), ((0, 3), 2), ((1, 2), 3), ((1, 3), 4), ((2, 3), 5)];
        for ((i, j), r) in expect {
            assert_eq!(dual_index(i, j, 4).unwrap(), r);
            assert_eq!(dual_pair(r, 4).unwrap(), (i, j));
        }
    }

    #[test]
    fn dual_index_first_and_last() {
        for n in 2..30 {
            assert_eq!(dual_index(0, 1, n).unwrap(), 0);
            assert_eq!(dual_index(n - 2, n - 1, n).unwrap(), pair_count(n) - 1);
        }
    }

    #[test]
    fn dual_index_domain_errors() {
        assert!(dual_index(2, 2, 4).is_err());
        assert!(dual_index(3, 1, 4).is_err());
        assert!(dual_index(1, 4, 4).is_err());
    }

    #[test]
    fn dual_index_matches_enumeration_exhaustively() {
        for n in 2..=50 {
            let mut r = 0;
            for i in 0..n {
                for j in i + 1..n {
                    assert_eq!(dual_index(i, j, n).unwrap(), r);
                    r += 1;
                }
            }
        }
    }

    #[test]
    fn triangle_and_k4() {
        let k3 = build_dual_complete(3).unwrap();
        assert_eq!((k3.m(), k3.dual_edges().len()), (3, 3));
        let k4 = build_dual_complete(4).unwrap();
        assert_eq!((k4.m(), k4.dual_edges().len()), (6, 12));
        assert!(k4.degrees().iter().all(|&d| d == 4));
        assert_eq!(sorted(k4.dual_edges()), line_graph_bruteforce(&complete_edges(4)));
    }

    #[test]
    fn k2_has_single_isolated_dual_node() {
        let d = build_dual_complete(2).unwrap();
        assert_eq!((d.m(), d.dual_edges().len()), (1, 0));
        assert!(build_dual_complete(1).is_err());
    }

    #[test]
    fn index_maps_are_inverse() {
        let d = build_dual_complete(7).unwrap();
        for r in 0..d.m() {
            let (i, j) = d.edge_of(r).unwrap();
            assert_eq!(d.index_of(i, j), Some(r));
            assert_eq!(d.index_of(j, i), Some(r));
        }
    }

    #[test]
    fn directed_examples() {
        let single = build_dual_directed(&[(0, 1)]).unwrap();
        assert_eq!((single.m(), single.dual_edges().len()), (1, 0));
        let head = build_dual_directed(&[(0, 1), (2, 1)]).unwrap();
        assert_eq!((head.m(), head.dual_edges().len()), (2, 1));
        let arcs: Vec<_> = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let full = build_dual_directed(&arcs).unwrap();
        assert_eq!(full.m(), 6);
        assert_eq!(sorted(full.dual_edges()), line_graph_bruteforce(&arcs));
        assert_eq!(full.index_of(2, 0), Some(4));
        assert_eq!(full.index_of(0, 2), Some(1));
    }

    #[test]
    fn directed_rejects_loops_and_duplicates() {
        assert!(build_dual_directed(&[(1, 1)]).is_err());
        assert!(build_dual_directed(&[(0, 1), (0, 1)]).is_err());
        assert!(build_dual_directed(&[(0, 1), (1, 0)]).is_ok());
    }

    #[test]
    fn bruteforce_fixtures() {
        assert_eq!(line_graph_bruteforce(&[(0, 1), (1, 2)]), vec![(0, 1)]);
        let star = [(0, 1), (0, 2), (0, 3), (0, 4)];
        assert_eq!(line_graph_bruteforce(&star).len(), 6);
        assert_eq!(line_graph_bruteforce(&complete_edges(4)).len(), 12);
    }
}
