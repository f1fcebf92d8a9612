//! Finite-difference suite over every differentiable op, the layers and the
//! three full models.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, grad_check_params, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::graph::{pair_count, Connectome, MessageGraph};
use crate::layers::{graph_norm, gt_layer_forward, GraphNormParams, Gtb, GtLayerParams};
use crate::models::{Model, ModelKind};

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Bound for single ops and smooth layers.
pub const OP_THRESHOLD: f64 = 1e-6;
/// Bound for compositions containing ReLU or min-max kinks.
pub const MODEL_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl GradCheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

fn random(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("sizes agree")
}

/// Values in `[0.1, 1)` with a random sign, so nothing sits near a kink at zero.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = random(shape, 0.1, 1.0, rng);
    for v in t.data_mut() {
        if rng.gen_bool(0.5) {
            *v = -*v;
        }
    }
    t
}

/// `sum(y * r)` for a fixed random `r`, so every output entry matters.
fn project(t: &mut Tape, y: Var, r: &Tensor) -> Result<Var> {
    let r = t.constant(r.clone());
    let p = t.mul(y, r)?;
    Ok(t.sum(p))
}

type OpFn = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, OpFn, Tensor)> {
    let r34 = random(&[3, 4], -1.0, 1.0, rng);
    let r32 = random(&[3, 2], -1.0, 1.0, rng);
    let r43 = random(&[4, 3], -1.0, 1.0, rng);
    let r38 = random(&[3, 8], -1.0, 1.0, rng);
    let r14 = random(&[1, 4], -1.0, 1.0, rng);
    let r61 = random(&[6, 1], -1.0, 1.0, rng);
    let r53 = random(&[5, 3], -1.0, 1.0, rng);
    let r51 = random(&[5, 1], -1.0, 1.0, rng);
    let r44 = random(&[4, 4], -1.0, 1.0, rng);
    let b42 = random(&[4, 2], -1.0, 1.0, rng);
    let c34 = random(&[3, 4], -1.0, 1.0, rng);
    let t34 = random(&[3, 4], -1.0, 1.0, rng);
    let idx: Arc<[u32]> = vec![0, 2, 2, 1, 3].into();
    let dst: Arc<[u32]> = vec![1, 1, 0, 3, 2].into();
    let offsets: Arc<[usize]> = vec![0, 2, 3, 6].into();
    let x34 = random(&[3, 4], -1.0, 1.0, rng);
    let x43 = random(&[4, 3], -1.0, 1.0, rng);
    let mut cases: Vec<(&'static str, OpFn, Tensor)> = Vec::new();
    macro_rules! case {
        ($name:expr, $x:expr, |$t:ident, $v:ident| $body:expr) => {
            cases.push(($name, Box::new(move |$t: &mut Tape, $v: Var| $body), $x));
        };
    }
    {
        let (b, r) = (b42.clone(), r32.clone());
        case!("matmul", x34.clone(), |t, x| {
            let b = t.constant(b.clone());
            let y = t.matmul(x, b)?;
            project(t, y, &r)
        });
    }
    {
        let r = r43.clone();
        case!("transpose", x34.clone(), |t, x| {
            let y = t.transpose(x)?;
            project(t, y, &r)
        });
    }
    for (name, which) in [("add", 0), ("sub", 1), ("mul", 2)] {
        let (c, r) = (c34.clone(), r34.clone());
        case!(name, x34.clone(), |t, x| {
            let c = t.constant(c.clone());
            let y = match which {
                0 => t.add(x, c)?,
                1 => t.sub(c, x)?,
                _ => t.mul(x, c)?,
            };
            let y = t.mul(y, x)?;
            project(t, y, &r)
        });
    }
    {
        let r = r34.clone();
        case!("scale", x34.clone(), |t, x| {
            let y = t.scale(x, -2.5);
            let y = t.mul(y, x)?;
            project(t, y, &r)
        });
    }
    {
        let r = r34.clone();
        case!("relu", away_from_zero(&[3, 4], rng), |t, x| {
            let y = t.relu(x);
            let y = t.mul(y, x)?;
            project(t, y, &r)
        });
    }
    {
        let (o, r) = (offsets.clone(), r61.clone());
        case!("segment_softmax", random(&[6, 1], -2.0, 2.0, rng), |t, x| {
            let y = t.segment_softmax(x, o.clone())?;
            project(t, y, &r)
        });
    }
    {
        let (c, r) = (c34.clone(), r38.clone());
        case!("concat_cols", x34.clone(), |t, x| {
            let c = t.constant(c.clone());
            let xc = t.mul(x, c)?;
            let y = t.concat_cols(&[x, xc])?;
            project(t, y, &r)
        });
    }
    {
        let r = r34.clone();
        let r1 = r14.clone();
        case!("col_mean+broadcast_rows", x34.clone(), |t, x| {
            let m = t.col_mean(x)?;
            let sq = t.mul(m, m)?;
            let b = t.broadcast_rows(m, 3)?;
            let y = t.mul(b, x)?;
            let a = project(t, y, &r)?;
            let s = project(t, sq, &r1)?;
            t.add(a, s)
        });
    }
    {
        let r = r34.clone();
        case!("rsqrt+add_scalar", random(&[3, 4], 0.5, 2.0, rng), |t, x| {
            let y = t.add_scalar(x, 0.25);
            let y = t.rsqrt(y);
            project(t, y, &r)
        });
    }
    {
        let (i, d, o, s, r) = (idx.clone(), dst.clone(), r53.clone(), r51.clone(), r43.clone());
        case!("gather/scatter/row_dot/mul_rows", x43.clone(), |t, x| {
            let g = t.gather_rows(x, i.clone())?;
            let oc = t.constant(o.clone());
            let dot = t.row_dot(g, oc)?;
            let sc = t.constant(s.clone());
            let m = t.mul_rows(g, dot)?;
            let m = t.mul_rows(m, sc)?;
            let back = t.scatter_add_rows(m, d.clone(), 4)?;
            project(t, back, &r)
        });
    }
    {
        let (w, r) = (r61.clone(), r44.clone());
        case!("minmax/upper_tri/devectorize/gather_flat", x34.clone(), |t, x| {
            let xt = t.transpose(x)?;
            let g = t.matmul(xt, x)?;
            let s = t.minmax_scale(g)?;
            let u = t.upper_tri(s)?;
            let wc = t.constant(w.clone());
            let p = t.mul(u, wc)?;
            let full = t.devectorize(p, 4)?;
            let flat = t.gather_flat(full, vec![1, 4, 7, 14].into())?;
            let sq = t.mul(flat, flat)?;
            let a = t.sum(sq);
            let b = project(t, full, &r)?;
            t.add(a, b)
        });
    }
    {
        let r = r14.clone();
        case!("feature_mean_var", x34.clone(), |t, x| {
            let (m, v) = t.feature_mean_var(x)?;
            let y = t.add(m, v)?;
            let y = t.mul(y, v)?;
            project(t, y, &r)
        });
    }
    {
        let target = t34.clone();
        // Offsets keep |pred - target| >= 0.1.
        case!("l1_loss", away_from_zero(&[3, 4], rng), |t, x| {
            let tc = t.constant(target.clone());
            let pred = t.add(x, tc)?;
            let tc = t.constant(target.clone());
            t.l1_loss(pred, tc)
        });
    }
    {
        let r = r34.clone();
        case!("dropout", x34.clone(), |t, x| {
            let mut mask_rng = ChaCha8Rng::seed_from_u64(17);
            let y = t.dropout(x, 0.3, true, &mut mask_rng)?;
            let y = t.mul(y, x)?;
            project(t, y, &r)
        });
    }
    cases
}

/// Every differentiable op, GraphNorm, the graph transformer layer and a GTB.
pub fn op_suite(seed: u64) -> Result<Vec<GradCheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (name, f, x) in op_cases(&mut rng) {
        out.push(GradCheckResult {
            name: name.to_string(),
            max_rel_error: grad_check(f, &x, STEP)?,
            threshold: OP_THRESHOLD,
        });
    }
    let x = random(&[5, 3], -1.0, 1.0, &mut rng);
    let r = random(&[5, 3], -1.0, 1.0, &mut rng);
    let w = random(&[20, 1], 0.1, 1.0, &mut rng);
    let graph = MessageGraph::complete(5);

    let mut store = ParamStore::new();
    let norm = GraphNormParams::new(&mut store, "norm", 3);
    for p in store.iter_mut() {
        p.tensor.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
    }
    let check = grad_check_params(
        &mut store,
        |t, s| {
            let xc = t.constant(x.clone());
            let y = graph_norm(t, s, &norm, xc)?;
            project(t, y, &r)
        },
        STEP,
    )?;
    out.push(GradCheckResult { name: "graph_norm".into(), max_rel_error: check.max_rel_error, threshold: OP_THRESHOLD });

    let mut store = ParamStore::new();
    let layer = GtLayerParams::new(&mut store, "gt", 3, 2, 3, 2, 0.0, &mut rng)?;
    let check = grad_check_params(
        &mut store,
        |t, s| {
            let xc = t.constant(x.clone());
            let wc = t.constant(w.clone());
            let mut drop = ChaCha8Rng::seed_from_u64(0);
            let y = gt_layer_forward(t, s, &layer, xc, &graph, wc, false, &mut drop)?.out;
            project(t, y, &r)
        },
        STEP,
    )?;
    out.push(GradCheckResult { name: "gt_layer".into(), max_rel_error: check.max_rel_error, threshold: OP_THRESHOLD });

    let mut store = ParamStore::new();
    let gtb = Gtb::new(&mut store, "gtb", 3, 2, 3, 2, 0.2, &mut rng)?;
    let check = grad_check_params(
        &mut store,
        |t, s| {
            let xc = t.constant(x.clone());
            let wc = t.constant(w.clone());
            let mut drop = ChaCha8Rng::seed_from_u64(5);
            let (y, _) = gtb.forward(t, s, xc, &graph, wc, true, &mut drop)?;
            project(t, y, &r)
        },
        STEP,
    )?;
    out.push(GradCheckResult { name: "gtb".into(), max_rel_error: check.max_rel_error, threshold: MODEL_THRESHOLD });
    Ok(out)
}

fn random_connectome(n: usize, rng: &mut ChaCha8Rng) -> Connectome {
    let v: Vec<f64> = (0..pair_count(n)).map(|_| rng.gen_range(0.0..1.0)).collect();
    Connectome::devectorize(&v, n).expect("valid weights")
}

/// End-to-end L1 loss gradient of one model on a random 6 -> 8 pair.
pub fn model_check(kind: ModelKind, seed: u64) -> Result<GradCheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_s = random_connectome(6, &mut rng);
    let a_t = random_connectome(8, &mut rng);
    let mut model = Model::new(kind, 6, 8, seed)?;
    let frozen = model.clone();
    let check = grad_check_params(
        &mut model.params,
        |t, s| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            frozen.loss(t, s, &a_s, &a_t, false, &mut r)
        },
        STEP,
    )?;
    Ok(GradCheckResult {
        name: format!("model:{kind}"),
        max_rel_error: check.max_rel_error,
        threshold: MODEL_THRESHOLD,
    })
}

pub fn model_suite(seed: u64) -> Result<Vec<GradCheckResult>> {
    ModelKind::ALL.iter().map(|&k| model_check(k, seed)).collect()
}
