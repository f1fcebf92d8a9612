use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::graph::Connectome;
use crate::seed::derive_seed;

/// Within-module pair strengths are drawn from this band.
const WITHIN: (f64, f64) = (0.6, 1.0);
/// Between-module pair strengths are drawn from this band.
const BETWEEN: (f64, f64) = (0.0, 0.15);
/// Per-edge jitter added on top of the module-pair strength.
const JITTER: f64 = 0.1;
/// Off-primary mass of each high-resolution node in the aggregation map.
const SPILL: f64 = 0.15;

/// Missing keys take the desk-scale defaults (30 samples, 20 -> 30 nodes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub n_s: usize,
    pub n_t: usize,
    /// Amplitude of the symmetric uniform noise added to LR matrices.
    pub noise: f64,
    pub modules: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            samples: 30,
            n_s: 20,
            n_t: 30,
            noise: 0.05,
            modules: 4,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::Domain("samples must be at least 1".into()));
        }
        if self.n_s < 2 || self.n_s >= self.n_t {
            return Err(Error::Domain(format!(
                "need 2 <= n_s < n_t, got n_s = {}, n_t = {}",
                self.n_s, self.n_t
            )));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Domain(format!("noise must lie in [0, 1), got {}", self.noise)));
        }
        if self.modules < 1 || self.modules > self.n_t {
            return Err(Error::Domain(format!("modules must lie in 1..={}, got {}", self.n_t, self.modules)));
        }
        Ok(())
    }
}

/// Planted module of every high-resolution node: a seeded shuffle split into
/// near-equal contiguous blocks.
pub fn module_labels(cfg: &SyntheticConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cfg.n_t).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "modules")));
    let mut labels = vec![0; cfg.n_t];
    for (rank, &node) in order.iter().enumerate() {
        labels[node] = rank * cfg.modules / cfg.n_t;
    }
    labels
}

/// Dataset-level `n_t x n_s` aggregation map with columns summing to one.
///
/// HR nodes sorted by module are dealt to LR regions in contiguous runs, so a
/// coarse region mostly covers one module and every region gets at least one
/// node. Each HR node also spills a little mass onto two random regions.
pub fn aggregation_map(cfg: &SyntheticConfig) -> Vec<f64> {
    let (n_s, n_t) = (cfg.n_s, cfg.n_t);
    let labels = module_labels(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "aggregation"));
    let mut order: Vec<usize> = (0..n_t).collect();
    order.sort_by_key(|&i| (labels[i], i));
    let mut p = vec![0.0; n_t * n_s];
    for (rank, &i) in order.iter().enumerate() {
        p[i * n_s + rank * n_s / n_t] += 1.0;
        for _ in 0..2 {
            let j = rng.gen_range(0..n_s);
            p[i * n_s + j] += SPILL * rng.gen::<f64>();
        }
    }
    for j in 0..n_s {
        let total: f64 = (0..n_t).map(|i| p[i * n_s + j]).sum();
        for i in 0..n_t {
            p[i * n_s + j] /= total;
        }
    }
    p
}

/// Min-max scales the off-diagonal entries into `[0, 1]`; constant input maps to zeros.
fn minmax_offdiag(w: &mut [f64], n: usize) {
    let off = |k: usize| k / n != k % n;
    let (lo, hi) = (0..n * n)
        .filter(|&k| off(k))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(w[k]), hi.max(w[k])));
    for k in 0..n * n {
        w[k] = if off(k) && hi > lo { (w[k] - lo) / (hi - lo) } else { 0.0 };
    }
}

fn hr_sample(cfg: &SyntheticConfig, labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, m) = (cfg.n_t, cfg.modules);
    let mut strength = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let band = if a == b { WITHIN } else { BETWEEN };
            let s = rng.gen_range(band.0..band.1);
            strength[a * m + b] = s;
            strength[b * m + a] = s;
        }
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = strength[labels[i] * m + labels[j]] + JITTER * rng.gen_range(-1.0..1.0);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    minmax_offdiag(&mut w, n);
    w
}

fn lr_sample(cfg: &SyntheticConfig, hr: &[f64], p: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n_s, n_t) = (cfg.n_s, cfg.n_t);
    // A P, then P^T (A P).
    let mut ap = vec![0.0; n_t * n_s];
    for i in 0..n_t {
        for k in 0..n_t {
            let a = hr[i * n_t + k];
            if a != 0.0 {
                for j in 0..n_s {
                    ap[i * n_s + j] += a * p[k * n_s + j];
                }
            }
        }
    }
    let mut w = vec![0.0; n_s * n_s];
    for a in 0..n_s {
        for b in 0..n_s {
            w[a * n_s + b] = (0..n_t).map(|i| p[i * n_s + a] * ap[i * n_s + b]).sum();
        }
    }
    for a in 0..n_s {
        for b in a + 1..n_s {
            let v = 0.5 * (w[a * n_s + b] + w[b * n_s + a]);
            w[a * n_s + b] = v;
            w[b * n_s + a] = v;
        }
    }
    minmax_offdiag(&mut w, n_s);
    for a in 0..n_s {
        for b in a + 1..n_s {
            let v = (w[a * n_s + b] + cfg.noise * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
            w[a * n_s + b] = v;
            w[b * n_s + a] = v;
        }
    }
    w
}

/// Planted-modular HR graphs and their aggregated, noisy LR counterparts.
/// A pure function of `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let labels = module_labels(cfg);
    let p = aggregation_map(cfg);
    let width = cfg.samples.saturating_sub(1).max(1).to_string().len().max(3);
    (0..cfg.samples)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("sample/{k}")));
            let hr = hr_sample(cfg, &labels, &mut rng);
            let lr = lr_sample(cfg, &hr, &p, &mut rng);
            Ok(Sample {
                id: format!("sample_{k:0width$}"),
                lr: Connectome::new(cfg.n_s, lr)?,
                hr: Connectome::new(cfg.n_t, hr)?,
            })
        })
        .collect()
}
