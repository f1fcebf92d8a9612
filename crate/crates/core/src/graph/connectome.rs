use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted brain graph: symmetric, zero-diagonal, nonnegative `n x n` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connectome {
    n: usize,
    weights: Vec<f64>,
}

impl Connectome {
    /// Validates and wraps a row-major `n x n` weight matrix.
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::shape("connectome", &[n, n], &[weights.len()]));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::Validation(format!("non-finite weight at ({i}, {j})")));
                }
                if w < 0.0 {
                    return Err(Error::Validation(format!("negative weight {w} at ({i}, {j})")));
                }
                if i == j && w != 0.0 {
                    return Err(Error::Validation(format!("nonzero diagonal {w} at ({i}, {i})")));
                }
                if j > i && w != weights[j * n + i] {
                    return Err(Error::Validation(format!(
                        "asymmetric weights at ({i}, {j}): {w} vs {}",
                        weights[j * n + i]
                    )));
                }
            }
        }
        Ok(Connectome { n, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut weights = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            weights.extend_from_slice(row);
        }
        Self::new(n, weights)
    }

    pub fn zeros(n: usize) -> Self {
        Connectome {
            n,
            weights: vec![0.0; n * n],
        }
    }

    /// Complete graph with every off-diagonal weight equal to `w`.
    pub fn complete(n: usize, w: f64) -> Result<Self> {
        let weights = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { w })
            .collect();
        Self::new(n, weights)
    }

    /// Builds from undirected weighted edges; unlisted pairs are zero.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Validation(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Self::new(n, weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Relabels nodes so that node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Connectome {
        let n = self.n;
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                weights[perm[i] * n + perm[j]] = self.weights[i * n + j];
            }
        }
        Connectome { n, weights }
    }

    /// Row-major strict upper triangle: entry `dual_index(i, j, n)` holds `w[i][j]`.
    pub fn upper_tri_vectorize(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            out.extend_from_slice(&self.weights[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    /// Inverse of [`Connectome::upper_tri_vectorize`].
    pub fn devectorize(v: &[f64], n: usize) -> Result<Self> {
        if v.len() != pair_count(n) {
            return Err(Error::shape("devectorize", &[pair_count(n)], &[v.len()]));
        }
        Self::new(n, devectorize_raw(v, n))
    }
}

/// `n (n - 1) / 2`, the number of unordered node pairs.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Pads, reshapes and reflects an upper-triangle vector into a full matrix.
pub(crate) fn devectorize_raw(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let mut r = 0;
    for i in 0..n {
        for j in i + 1..n {
            out[i * n + j] = v[r];
            out[j * n + i] = v[r];
            r += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorize_three_nodes() {
        let (a, b, c) = (0.1, 0.2, 0.3);
        let w = Connectome::from_rows(&[vec![0.0, a, b], vec![a, 0.0, c], vec![b, c, 0.0]]).unwrap();
        assert_eq!(w.upper_tri_vectorize(), vec![a, b, c]);
        assert_eq!(Connectome::devectorize(&[a, b, c], 3).unwrap(), w);
    }

    #[test]
    fn zero_matrix_vectorizes_to_zeros() {
        assert_eq!(Connectome::zeros(5).upper_tri_vectorize(), vec![0.0; 10]);
    }

    #[test]
    fn degenerate_single_node() {
        let c = Connectome::devectorize(&[], 1).unwrap();
        assert_eq!(c.weights(), &[0.0]);
    }

    #[test]
    fn devectorize_rejects_wrong_length() {
        assert!(matches!(
            Connectome::devectorize(&[1.0, 2.0], 3),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn rejects_asymmetry_and_diagonal() {
        let asym = Connectome::new(2, vec![0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(asym, Err(Error::Validation(ref m)) if m.contains("(0, 1)")));
        let diag = Connectome::new(2, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(diag, Err(Error::Validation(ref m)) if m.contains("diagonal")));
        let neg = Connectome::new(2, vec![0.0, -1.0, -1.0, 0.0]);
        assert!(neg.is_err());
    }

    #[test]
    fn permutation_relabels() {
        let w = Connectome::from_edges(3, &[(0, 1, 0.5)]).unwrap();
        let p = w.permuted(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), 0.5);
        assert_eq!(p.get(0, 1), 0.0);
    }
}
