use std::sync::Arc;

use super::dual::DualTopology;
use crate::error::{Error, Result};

/// Directed arcs grouped by destination, the layout attention layers consume.
///
/// Arc `e` carries a message from `src[e]` into `dst[e]`. Arcs are sorted by
/// destination; `offsets` delimits the non-empty destination segments and
/// `targets[k]` is the node owning segment `k`.
#[derive(Clone, Debug)]
pub struct MessageGraph {
    n: usize,
    src: Arc<[u32]>,
    dst: Arc<[u32]>,
    offsets: Arc<[usize]>,
    targets: Arc<[u32]>,
}

impl MessageGraph {
    /// Builds from arbitrary `(src, dst)` arcs; order within a segment follows input order.
    pub fn from_arcs(n: usize, arcs: &[(u32, u32)]) -> Result<Self> {
        let mut counts = vec![0usize; n];
        for &(s, d) in arcs {
            if s as usize >= n || d as usize >= n {
                return Err(Error::Validation(format!("arc ({s}, {d}) out of range for {n} nodes")));
            }
            counts[d as usize] += 1;
        }
        Ok(Self::counting_sort(n, arcs.len(), &counts, arcs.iter().copied()))
    }

    fn counting_sort(
        n: usize,
        len: usize,
        counts: &[usize],
        arcs: impl Iterator<Item = (u32, u32)>,
    ) -> Self {
        let mut start = vec![0usize; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + counts[v];
        }
        let mut fill = start.clone();
        let mut src = vec![0u32; len];
        let mut dst = vec![0u32; len];
        for (s, d) in arcs {
            let slot = fill[d as usize];
            src[slot] = s;
            dst[slot] = d;
            fill[d as usize] += 1;
        }
        let mut offsets = vec![0usize];
        let mut targets = Vec::new();
        for v in 0..n {
            if counts[v] > 0 {
                targets.push(v as u32);
                offsets.push(start[v + 1]);
            }
        }
        MessageGraph {
            n,
            src: src.into(),
            dst: dst.into(),
            offsets: offsets.into(),
            targets: targets.into(),
        }
    }

    /// Every ordered pair `i != j` of `n` nodes.
    pub fn complete(n: usize) -> Self {
        let arcs = (0..n as u32).flat_map(|d| (0..n as u32).filter(move |&s| s != d).map(move |s| (s, d)));
        let counts = vec![n.saturating_sub(1); n];
        Self::counting_sort(n, n * n.saturating_sub(1), &counts, arcs)
    }

    /// Both orientations of every dual edge.
    pub fn from_dual(dual: &DualTopology) -> Self {
        let degrees = dual.degrees();
        let arcs = dual
            .dual_edges()
            .iter()
            .flat_map(|&(r, c)| [(r, c), (c, r)]);
        Self::counting_sort(dual.m(), 2 * dual.dual_edges().len(), &degrees, arcs)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self) -> &Arc<[u32]> {
        &self.src
    }

    pub fn dst(&self) -> &Arc<[u32]> {
        &self.dst
    }

    pub fn offsets(&self) -> &Arc<[usize]> {
        &self.offsets
    }

    pub fn targets(&self) -> &Arc<[u32]> {
        &self.targets
    }

    /// Flat `dst * n + src` index of each arc into an `n x n` weight matrix.
    pub fn flat_indices(&self) -> Arc<[u32]> {
        let n = self.n as u32;
        self.src
            .iter()
            .zip(self.dst.iter())
            .map(|(&s, &d)| d * n + s)
            .collect()
    }

    /// Per-arc weights `w[dst][src]` read from a row-major `n x n` matrix.
    pub fn weights_from(&self, matrix: &[f64]) -> Vec<f64> {
        let n = self.n;
        self.src
            .iter()
            .zip(self.dst.iter())
            .map(|(&s, &d)| matrix[d as usize * n + s as usize])
            .collect()
    }
}
