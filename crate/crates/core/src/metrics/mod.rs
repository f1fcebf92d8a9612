//! Weighted-network topology measures and the per-sample evaluation report.
//!
//! Path-based measures use `1 / w` as edge length and ignore weights below
//! [`EDGE_THRESHOLD`].

mod centrality;
mod community;
mod small_world;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use centrality::{
    betweenness_centrality, characteristic_path_length, closeness_centrality, clustering_coefficient,
    degree_centrality, eigenvector_centrality, is_connected, shortest_path_matrix, EDGE_THRESHOLD,
    EIGEN_MAX_ITER, EIGEN_TOL,
};
pub use community::{detect_communities, modularity, participation_coefficient, Partition};
pub use small_world::{small_worldness, surrogates, SURROGATES};

use crate::error::{Error, Result};
use crate::graph::Connectome;

/// Names of the eight reported measures, in report order.
pub const METRIC_NAMES: [&str; 8] = [
    "edge_mae",
    "degree",
    "betweenness",
    "closeness",
    "eigenvector",
    "clustering",
    "participation",
    "small_worldness",
];

/// Mean absolute difference over the strict upper triangle.
pub fn edge_mae(pred: &Connectome, truth: &Connectome) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::shape("edge_mae", &[pred.n(), pred.n()], &[truth.n(), truth.n()]));
    }
    metric_mae(&pred.upper_tri_vectorize(), &truth.upper_tri_vectorize())
}

/// Mean absolute difference of two vectors; zero for empty inputs.
pub fn metric_mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape("metric_mae", &[pred.len()], &[truth.len()]));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len() as f64)
}

/// The seven topological measures of one graph. Small-worldness is a
/// one-element vector.
pub fn topological_measures(w: &Connectome, partition: &Partition, seed: u64) -> BTreeMap<&'static str, Result<Vec<f64>>> {
    let mut out = BTreeMap::new();
    out.insert("degree", degree_centrality(w));
    out.insert("betweenness", betweenness_centrality(w));
    out.insert("closeness", Ok(closeness_centrality(w)));
    out.insert("eigenvector", eigenvector_centrality(w));
    out.insert("clustering", Ok(clustering_coefficient(w)));
    out.insert("participation", participation_coefficient(w, partition));
    out.insert("small_worldness", small_worldness(w, seed).map(|s| vec![s]));
    out
}

/// Evaluation of one predicted graph against its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    /// Per-node MAE for vector measures, absolute difference for
    /// small-worldness, and the edge MAE. `None` when a measure failed.
    pub values: BTreeMap<String, Option<f64>>,
    /// Absolute difference of graph-level means for the seven topological measures.
    pub graph_mean: BTreeMap<String, Option<f64>>,
    /// Reasons for measures that could not be computed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failures: BTreeMap<String, String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Compares `pred` with `truth` on all eight measures.
///
/// Communities are detected once on the ground truth and reused for the
/// prediction; both graphs get the same surrogate seed.
pub fn evaluate_sample(id: &str, pred: &Connectome, truth: &Connectome, seed: u64) -> Result<SampleMetrics> {
    let mut report = SampleMetrics {
        id: id.to_string(),
        values: BTreeMap::new(),
        graph_mean: BTreeMap::new(),
        failures: BTreeMap::new(),
    };
    report.values.insert("edge_mae".into(), Some(edge_mae(pred, truth)?));
    let partition = detect_communities(truth, seed);
    let p = topological_measures(pred, &partition, seed);
    let t = topological_measures(truth, &partition, seed);
    for (name, pv) in p {
        let entry = match (pv, &t[name]) {
            (Ok(a), Ok(b)) => Ok((metric_mae(&a, b)?, (mean(&a) - mean(b)).abs())),
            (Err(e), _) => Err(format!("prediction: {e}")),
            (_, Err(e)) => Err(format!("ground truth: {e}")),
        };
        match entry {
            Ok((mae, gm)) => {
                report.values.insert(name.into(), Some(mae));
                report.graph_mean.insert(name.into(), Some(gm));
            }
            Err(reason) => {
                report.values.insert(name.into(), None);
                report.graph_mean.insert(name.into(), None);
                report.failures.insert(name.into(), reason);
            }
        }
    }
    Ok(report)
}

/// Evaluates `(id, pred, truth, seed)` tuples on up to `jobs` threads.
/// The output order follows the input order.
pub fn evaluate_all(items: &[(String, Connectome, Connectome, u64)], jobs: usize) -> Result<Vec<SampleMetrics>> {
    let run = || {
        items
            .par_iter()
            .map(|(id, p, t, s)| evaluate_sample(id, p, t, *s))
            .collect::<Result<Vec<_>>>()
    };
    if jobs <= 1 {
        return items.iter().map(|(id, p, t, s)| evaluate_sample(id, p, t, *s)).collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
        .install(run)
}

/// Mean of the non-null values per key; `None` if every value is null.
pub fn mean_by_key<'a>(maps: impl IntoIterator<Item = &'a BTreeMap<String, Option<f64>>>) -> BTreeMap<String, Option<f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            let e = acc.entry(k.clone()).or_insert((0.0, 0));
            if let Some(x) = v {
                e.0 += x;
                e.1 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(k, (s, c))| (k, (c > 0).then(|| s / c as f64)))
        .collect()
}

/// Per-sample metrics of one model on one evaluation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub fold: Option<usize>,
    pub per_sample: Vec<SampleMetrics>,
    pub aggregate: BTreeMap<String, Option<f64>>,
    pub aggregate_graph_mean: BTreeMap<String, Option<f64>>,
}

impl MetricsReport {
    pub fn new(model: &str, fold: Option<usize>, per_sample: Vec<SampleMetrics>) -> Self {
        let aggregate = mean_by_key(per_sample.iter().map(|s| &s.values));
        let aggregate_graph_mean = mean_by_key(per_sample.iter().map(|s| &s.graph_mean));
        MetricsReport {
            model: model.to_string(),
            fold,
            per_sample,
            aggregate,
            aggregate_graph_mean,
        }
    }

    /// Rows of `model,fold,sample,metric,value,graph_mean_diff`; empty cells for nulls.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<&Option<f64>>| v.copied().flatten().map(|x| x.to_string()).unwrap_or_default();
        let fold = self.fold.map(|f| f.to_string()).unwrap_or_default();
        let mut out = String::from("model,fold,sample,metric,value,graph_mean_diff\n");
        for s in &self.per_sample {
            for name in METRIC_NAMES {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.model,
                    fold,
                    s.id,
                    name,
                    cell(s.values.get(name)),
                    cell(s.graph_mean.get(name))
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, seed: u64) -> Connectome {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..crate::graph::pair_count(n)).map(|_| rng.gen_range(0.05..1.0)).collect();
        Connectome::devectorize(&v, n).unwrap()
    }

    #[test]
    fn edge_mae_fixtures() {
        let ones = Connectome::complete(3, 1.0).unwrap();
        let zeros = Connectome::zeros(3);
        assert_eq!(edge_mae(&zeros, &ones).unwrap(), 1.0);
        assert_eq!(edge_mae(&ones, &ones).unwrap(), 0.0);
        let (a, b) = (graph(6, 1), graph(6, 2));
        assert_eq!(edge_mae(&a, &b).unwrap(), edge_mae(&b, &a).unwrap());
        assert!(matches!(edge_mae(&a, &Connectome::zeros(5)), Err(Error::Shape { .. })));
    }

    #[test]
    fn identical_graphs_score_zero() {
        let g = graph(10, 4);
        let r = evaluate_sample("s", &g, &g, 7).unwrap();
        assert_eq!(r.values.len(), 8);
        for name in METRIC_NAMES {
            assert_eq!(r.values[name], Some(0.0), "{name}");
        }
        assert!(r.failures.is_empty());
    }

    #[test]
    fn failures_become_null() {
        let truth = graph(6, 3);
        let pred = Connectome::zeros(6);
        let r = evaluate_sample("s", &pred, &truth, 0).unwrap();
        assert_eq!(r.values.len(), 8);
        assert_eq!(r.values["eigenvector"], None);
        assert_eq!(r.values["small_worldness"], None);
        assert!(r.failures.contains_key("eigenvector"));
        assert!(r.values["degree"].is_some());
    }

    #[test]
    fn parallel_matches_serial() {
        let items: Vec<_> = (0..6)
            .map(|k| (format!("s{k}"), graph(8, k), graph(8, k + 100), k))
            .collect();
        assert_eq!(evaluate_all(&items, 1).unwrap(), evaluate_all(&items, 3).unwrap());
    }

    #[test]
    fn aggregate_is_mean_ignoring_nulls() {
        let mk = |v: Option<f64>| BTreeMap::from([("x".to_string(), v)]);
        let maps = [mk(Some(1.0)), mk(None), mk(Some(3.0))];
        assert_eq!(mean_by_key(&maps)["x"], Some(2.0));
        assert_eq!(mean_by_key(&[mk(None)])["x"], None);
    }

    #[test]
    fn csv_has_row_per_sample_metric() {
        let g = graph(6, 1);
        let s = evaluate_sample("a", &g, &graph(6, 2), 1).unwrap();
        let report = MetricsReport::new("stp_gsr", Some(0), vec![s]);
        assert_eq!(report.to_csv().lines().count(), 1 + 8);
    }
}
