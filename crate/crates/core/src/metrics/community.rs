use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Connectome;
use crate::metrics::centrality::neighbours;

/// Minimum modularity gain for a node move to count.
const MOVE_EPS: f64 = 1e-12;

/// Community assignment; ids are `0..count` in order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    count: usize,
}

impl Partition {
    /// Relabels arbitrary ids to `0..count` by first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = BTreeMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            count: map.len(),
        }
    }

    pub fn single(n: usize) -> Self {
        Partition::from_labels(&vec![0; n])
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }
}

/// Weighted modularity (resolution 1) of `p` on `w`. Zero for an empty graph.
pub fn modularity(w: &Connectome, p: &Partition) -> Result<f64> {
    check_partition(w, p)?;
    let n = w.n();
    let strength: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let two_m: f64 = strength.iter().sum();
    if two_m == 0.0 {
        return Ok(0.0);
    }
    let mut inside = vec![0.0; p.count()];
    let mut total = vec![0.0; p.count()];
    for i in 0..n {
        let ci = p.community_of(i);
        total[ci] += strength[i];
        for j in 0..n {
            if p.community_of(j) == ci {
                inside[ci] += w.get(i, j);
            }
        }
    }
    Ok(inside
        .iter()
        .zip(&total)
        .map(|(a, t)| a / two_m - (t / two_m).powi(2))
        .sum())
}

fn check_partition(w: &Connectome, p: &Partition) -> Result<()> {
    if p.len() != w.n() {
        return Err(Error::Validation(format!(
            "partition covers {} nodes, graph has {}",
            p.len(),
            w.n()
        )));
    }
    Ok(())
}

/// Weighted graph with self-loops, used between Louvain levels.
/// `loops[i]` holds the ordered-pair internal weight of super-node `i`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl Level {
    fn degree(&self, i: usize) -> f64 {
        self.loops[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }
}

/// Local moving phase. Returns the community of each node and whether anything moved.
fn move_nodes(level: &Level, two_m: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let degree: Vec<f64> = (0..n).map(|i| level.degree(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut total = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut moved_any = false;
    let mut links: BTreeMap<usize, f64> = BTreeMap::new();
    loop {
        let mut moved = false;
        for &i in &order {
            let own = comm[i];
            links.clear();
            links.insert(own, 0.0);
            for &(j, w) in &level.adj[i] {
                *links.entry(comm[j]).or_insert(0.0) += w;
            }
            total[own] -= degree[i];
            let gain = |c: usize, k_in: f64| k_in - total[c] * degree[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, links[&own]);
            for (&c, &k_in) in &links {
                let g = gain(c, k_in);
                if g > best_gain + MOVE_EPS {
                    best = c;
                    best_gain = g;
                }
            }
            total[best] += degree[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (comm, moved_any)
}

fn aggregate(level: &Level, comm: &[usize], count: usize) -> Level {
    let mut loops = vec![0.0; count];
    let mut cross: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); count];
    for (i, nb) in level.adj.iter().enumerate() {
        let ci = comm[i];
        loops[ci] += level.loops[i];
        for &(j, w) in nb {
            let cj = comm[j];
            if ci == cj {
                loops[ci] += w;
            } else {
                *cross[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    Level {
        adj: cross.into_iter().map(|m| m.into_iter().collect()).collect(),
        loops,
    }
}

/// Seeded Louvain: local moving over a shuffled node order, then aggregation,
/// until a level produces no move.
pub fn detect_communities(w: &Connectome, seed: u64) -> Partition {
    let n = w.n();
    let mut level = Level {
        adj: neighbours(w),
        loops: vec![0.0; n],
    };
    let two_m: f64 = (0..n).map(|i| level.degree(i)).sum();
    let mut labels: Vec<usize> = (0..n).collect();
    if two_m == 0.0 {
        return Partition::from_labels(&labels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (comm, moved) = move_nodes(&level, two_m, &mut rng);
        if !moved {
            break;
        }
        let p = Partition::from_labels(&comm);
        for l in labels.iter_mut() {
            *l = p.community_of(*l);
        }
        level = aggregate(&level, p.assignment(), p.count());
    }
    Partition::from_labels(&labels)
}

/// `P_i = 1 - sum_m (kappa_im / s_i)^2`, zero for isolated nodes.
pub fn participation_coefficient(w: &Connectome, p: &Partition) -> Result<Vec<f64>> {
    check_partition(w, p)?;
    let n = w.n();
    let mut kappa = vec![0.0; p.count()];
    Ok((0..n)
        .map(|i| {
            kappa.iter_mut().for_each(|k| *k = 0.0);
            let mut s = 0.0;
            for (j, &v) in w.row(i).iter().enumerate() {
                kappa[p.community_of(j)] += v;
                s += v;
            }
            if s == 0.0 {
                0.0
            } else {
                1.0 - kappa.iter().map(|k| (k / s).powi(2)).sum::<f64>()
            }
        })
        .collect())
}
