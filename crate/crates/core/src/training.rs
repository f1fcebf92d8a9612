//! Adam, k-fold splitting, the accumulation training loop and cross-validation.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape};
use crate::data::{check_samples, Sample};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_all, mean_by_key, MetricsReport};
use crate::models::{param_count, Model, ModelKind};
use crate::seed::derive_seed;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// A parameter larger than this in magnitude counts as diverged.
///
/// GraphNorm and min-max scaling keep the loss bounded even when the weights
/// blow up, so a non-finite loss alone would never flag a runaway step size.
pub const MAX_PARAM_ABS: f64 = 1e6;

fn default_lr() -> f64 {
    0.005
}
fn default_epochs() -> usize {
    60
}
fn default_batch() -> usize {
    16
}
fn default_folds() -> usize {
    3
}
fn default_kind() -> ModelKind {
    ModelKind::StpGsr
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub accumulation_batch: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kind")]
    pub model_kind: ModelKind,
    #[serde(default = "default_folds")]
    pub fold_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            accumulation_batch: default_batch(),
            seed: 0,
            model_kind: default_kind(),
            fold_count: default_folds(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.accumulation_batch < 1 {
            return Err(Error::Validation("accumulation_batch must be at least 1".into()));
        }
        if self.fold_count < 2 {
            return Err(Error::Validation(format!("fold_count must be at least 2, got {}", self.fold_count)));
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments for every parameter of a store.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.tensor.len()]).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update from the accumulated gradients, which are then zeroed.
pub fn adam_step(state: &mut AdamState, params: &mut ParamStore, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::shape("adam_step", &[state.m.len()], &[params.len()]));
    }
    for (k, p) in params.iter().enumerate() {
        if state.m[k].len() != p.tensor.len() {
            return Err(Error::shape("adam_step", &[state.m[k].len()], &[p.tensor.len()]));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let g = p.grad.data();
        let x = p.tensor.data_mut();
        for i in 0..x.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            x[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        p.zero_grad();
    }
    Ok(())
}

/// Seeded shuffle, then contiguous folds whose sizes differ by at most one.
/// Returns `(train, test)` index lists, each sorted.
pub fn kfold_split(sample_count: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || sample_count < k {
        return Err(Error::Domain(format!("cannot split {sample_count} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..sample_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (sample_count / k, sample_count % k);
    let mut start = 0;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        test.sort_unstable();
        train.sort_unstable();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training-mode loss over the samples of each epoch.
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

impl TrainHistory {
    /// `epoch,loss,seconds` rows, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,seconds\n");
        for (e, (l, s)) in self.epoch_loss.iter().zip(&self.epoch_seconds).enumerate() {
            out.push_str(&format!("{},{l},{s}\n", e + 1));
        }
        out
    }
}

/// Sum of per-sample gradients of `samples` (in order) into `model.params`,
/// returning the per-sample losses. Dropout streams come from `seeds`.
pub fn accumulate_gradients(model: &mut Model, samples: &[&Sample], seeds: &[u64], training: bool) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(samples.len());
    for (s, &seed) in samples.iter().zip(seeds) {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loss = model.loss(&mut tape, &model.params, &s.lr, &s.hr, training, &mut rng)?;
        losses.push(tape.value(loss).item());
        tape.backward(loss, &mut model.params)?;
    }
    Ok(losses)
}

/// Trains `model` in place.
///
/// Each epoch shuffles the sample positions with an epoch-derived seed and
/// walks them in groups of `accumulation_batch`; per-sample gradients are
/// summed, divided by the group's actual size and applied with one Adam step.
/// Seeds depend on positions, never on sample ids.
pub fn train(model: &mut Model, samples: &[Sample], cfg: &TrainConfig) -> Result<TrainHistory> {
    let (n_s, n_t) = check_samples(samples)?;
    if (n_s, n_t) != (model.n_s, model.n_t) {
        return Err(Error::Validation(format!(
            "samples are {n_s} -> {n_t} but the model is {} -> {}",
            model.n_s, model.n_t
        )));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) || cfg.accumulation_batch == 0 {
        return Err(Error::Validation("learning_rate must be finite and nonnegative, accumulation_batch positive".into()));
    }
    let mut adam = AdamState::new(&model.params);
    model.params.zero_grad();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch/{epoch}"))));
        let mut total = 0.0;
        for (g, group) in order.chunks(cfg.accumulation_batch).enumerate() {
            let batch: Vec<&Sample> = group.iter().map(|&i| &samples[i]).collect();
            let seeds: Vec<u64> = (0..group.len())
                .map(|k| derive_seed(cfg.seed, &format!("dropout/{epoch}/{}", g * cfg.accumulation_batch + k)))
                .collect();
            let losses = accumulate_gradients(model, &batch, &seeds, true)?;
            let sum: f64 = losses.iter().sum();
            if !sum.is_finite() || !model.params.grads_finite() {
                return Err(Error::Divergence { epoch: epoch + 1, loss: sum / group.len() as f64, reason: "non-finite loss or gradient" });
            }
            total += sum;
            model.params.scale_grads(1.0 / group.len() as f64);
            adam_step(&mut adam, &mut model.params, cfg.learning_rate)?;
            if model.params.iter().any(|p| p.tensor.data().iter().any(|x| !(x.abs() <= MAX_PARAM_ABS))) {
                return Err(Error::Divergence { epoch: epoch + 1, loss: sum / group.len() as f64, reason: "parameter magnitude exceeded 1e6" });
            }
        }
        history.epoch_loss.push(total / samples.len() as f64);
        history.epoch_seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(history)
}

/// Evaluation seed of a sample: derived from its contents, so identical
/// samples get identical seeds wherever they appear.
pub fn eval_seed(base: u64, sample: &Sample) -> u64 {
    derive_seed(base, &sample.content_hash())
}

/// Predicts every sample and scores it against its ground truth.
pub fn evaluate_model(model: &Model, samples: &[Sample], seed: u64, fold: Option<usize>, jobs: usize) -> Result<(MetricsReport, Vec<crate::graph::Connectome>)> {
    let preds = samples.iter().map(|s| model.predict(&s.lr)).collect::<Result<Vec<_>>>()?;
    let items: Vec<_> = samples
        .iter()
        .zip(&preds)
        .map(|(s, p)| (s.id.clone(), p.clone(), s.hr.clone(), eval_seed(seed, s)))
        .collect();
    let per_sample = evaluate_all(&items, jobs)?;
    Ok((MetricsReport::new(model.kind.as_str(), fold, per_sample), preds))
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub history: TrainHistory,
    pub report: MetricsReport,
    pub model: Model,
}

/// Cross-validation summary as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub model: String,
    pub config: TrainConfig,
    pub n_s: usize,
    pub n_t: usize,
    pub param_count: usize,
    pub folds: Vec<MetricsReport>,
    /// Mean over folds of each fold's aggregate.
    pub aggregate: BTreeMap<String, Option<f64>>,
    pub aggregate_graph_mean: BTreeMap<String, Option<f64>>,
}

/// Trains a fresh model per fold (all with `cfg.seed`) and evaluates it on the held-out fold.
pub fn cross_validate(samples: &[Sample], cfg: &TrainConfig, jobs: usize) -> Result<(CrossValidationReport, Vec<FoldResult>)> {
    let (n_s, n_t) = check_samples(samples)?;
    let splits = kfold_split(samples.len(), cfg.fold_count, cfg.seed)?;
    let mut folds = Vec::with_capacity(splits.len());
    for (f, (train_idx, test_idx)) in splits.iter().enumerate() {
        let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
        let (train_set, test_set) = (pick(train_idx), pick(test_idx));
        let mut model = Model::new(cfg.model_kind, n_s, n_t, cfg.seed)?;
        let history = train(&mut model, &train_set, cfg)?;
        let (report, _) = evaluate_model(&model, &test_set, cfg.seed, Some(f), jobs)?;
        folds.push(FoldResult {
            fold: f,
            train_ids: train_set.iter().map(|s| s.id.clone()).collect(),
            test_ids: test_set.iter().map(|s| s.id.clone()).collect(),
            history,
            report,
            model,
        });
    }
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.clone()).collect();
    let summary = CrossValidationReport {
        model: cfg.model_kind.as_str().into(),
        config: cfg.clone(),
        n_s,
        n_t,
        param_count: param_count(cfg.model_kind, n_s, n_t),
        aggregate: mean_by_key(reports.iter().map(|r| &r.aggregate)),
        aggregate_graph_mean: mean_by_key(reports.iter().map(|r| &r.aggregate_graph_mean)),
        folds: reports,
    };
    Ok((summary, folds))
}
