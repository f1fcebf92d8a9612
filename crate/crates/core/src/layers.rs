//! Graph transformer layer, GraphNorm and the block composing them.
//!
//! Features are row-major `n x d`, so every weight is stored input-major
//! (`d_in x d_h`) and applied as `X W`.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::MessageGraph;

pub const GRAPH_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadParams {
    /// Self (skip) projection.
    pub w1: ParamId,
    /// Value projection of neighbours.
    pub w2: ParamId,
    /// Query projection.
    pub w3: ParamId,
    /// Key projection.
    pub w4: ParamId,
    /// Edge-weight embedding, `1 x d_h`.
    pub w6: ParamId,
}

/// Multi-head graph transformer layer parameters.
#[derive(Clone, Debug)]
pub struct GtLayerParams {
    pub heads: Vec<HeadParams>,
    /// Output projection, `(H d_h) x d_out`.
    pub w0: ParamId,
    pub d_in: usize,
    pub d_h: usize,
    pub d_out: usize,
    pub dropout: f64,
}

/// Counters recorded by a layer pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerStats {
    pub rows: usize,
    pub arcs: usize,
}

impl GtLayerParams {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        d_out: usize,
        heads: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || d_in == 0 || d_h == 0 || d_out == 0 {
            return Err(Error::Domain(format!(
                "layer {prefix}: dimensions must be positive (H={heads}, d_in={d_in}, d_h={d_h}, d_out={d_out})"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Domain(format!("layer {prefix}: dropout {dropout} not in [0, 1)")));
        }
        let heads = (0..heads)
            .map(|h| HeadParams {
                w1: store.add_glorot(format!("{prefix}.head{h}.w1"), d_in, d_h, rng),
                w2: store.add_glorot(format!("{prefix}.head{h}.w2"), d_in, d_h, rng),
                w3: store.add_glorot(format!("{prefix}.head{h}.w3"), d_in, d_h, rng),
                w4: store.add_glorot(format!("{prefix}.head{h}.w4"), d_in, d_h, rng),
                w6: store.add_glorot(format!("{prefix}.head{h}.w6"), 1, d_h, rng),
            })
            .collect::<Vec<_>>();
        let w0 = store.add_glorot(format!("{prefix}.w0"), heads.len() * d_h, d_out, rng);
        Ok(GtLayerParams {
            heads,
            w0,
            d_in,
            d_h,
            d_out,
            dropout,
        })
    }

    pub fn num_params(&self) -> usize {
        self.heads.len() * (4 * self.d_in * self.d_h + self.d_h) + self.heads.len() * self.d_h * self.d_out
    }
}

/// Result of one layer pass.
#[derive(Clone, Debug)]
pub struct LayerOutput {
    pub out: Var,
    pub stats: LayerStats,
    /// Per-head attention coefficients (`E x 1`, after dropout), arc-aligned.
    pub attention: Vec<Var>,
}

/// One graph transformer pass.
///
/// For destination `i` and head `h`: `q_i = x_i W3`, `k_ij = x_j W4 + A_ij W6`,
/// `alpha_ij = softmax_j(q_i . k_ij / sqrt(d_h))`, and
/// `x_i^h = x_i W1 + sum_j alpha_ij (x_j W2 + A_ij W6)`. Heads are concatenated
/// and projected by `W0`. `edge_weights` is `E x 1`, aligned with the arcs of
/// `graph`.
pub fn gt_layer_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    store: &ParamStore,
    p: &GtLayerParams,
    x: Var,
    graph: &MessageGraph,
    edge_weights: Var,
    training: bool,
    rng: &mut R,
) -> Result<LayerOutput> {
    let (n, d_in) = tape.value(x).dims2("gt_layer")?;
    if d_in != p.d_in {
        return Err(Error::shape("gt_layer input", &[n, p.d_in], tape.shape(x)));
    }
    if graph.node_count() != n {
        return Err(Error::Validation(format!(
            "graph has {} nodes but features have {n} rows",
            graph.node_count()
        )));
    }
    let arcs = graph.arc_count();
    if tape.shape(edge_weights) != [arcs, 1] {
        return Err(Error::shape("gt_layer edge weights", &[arcs, 1], tape.shape(edge_weights)));
    }
    let inv_sqrt_d = 1.0 / (p.d_h as f64).sqrt();

    let mut head_out = Vec::with_capacity(p.heads.len());
    let mut attention = Vec::with_capacity(p.heads.len());
    for head in &p.heads {
        let w1 = tape.param(store, head.w1);
        let own = tape.matmul(x, w1)?;
        if arcs == 0 {
            head_out.push(own);
            continue;
        }
        let w2 = tape.param(store, head.w2);
        let w3 = tape.param(store, head.w3);
        let w4 = tape.param(store, head.w4);
        let w6 = tape.param(store, head.w6);

        let query = tape.matmul(x, w3)?;
        let key = tape.matmul(x, w4)?;
        let value = tape.matmul(x, w2)?;
        let edge_term = tape.matmul(edge_weights, w6)?;

        let q_e = tape.gather_rows(query, graph.dst().clone())?;
        let k_e = tape.gather_rows(key, graph.src().clone())?;
        let k_e = tape.add(k_e, edge_term)?;
        let logits = tape.row_dot(q_e, k_e)?;
        let logits = tape.scale(logits, inv_sqrt_d);
        let alpha = tape.segment_softmax(logits, graph.offsets().clone())?;
        let alpha = tape.dropout(alpha, p.dropout, training, rng)?;
        attention.push(alpha);

        let v_e = tape.gather_rows(value, graph.src().clone())?;
        let msg = tape.add(v_e, edge_term)?;
        let weighted = tape.mul_rows(msg, alpha)?;
        let agg = tape.scatter_add_rows(weighted, graph.dst().clone(), n)?;
        head_out.push(tape.add(own, agg)?);
    }
    let cat = tape.concat_cols(&head_out)?;
    let w0 = tape.param(store, p.w0);
    let out = tape.matmul(cat, w0)?;
    Ok(LayerOutput {
        out,
        stats: LayerStats { rows: n, arcs },
        attention,
    })
}

/// GraphNorm: per-feature learnable mean shift `alpha`, gain `gamma`, bias `beta`.
#[derive(Clone, Copy, Debug)]
pub struct GraphNormParams {
    pub alpha: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

impl GraphNormParams {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize) -> Self {
        GraphNormParams {
            alpha: store.add(format!("{prefix}.alpha"), Tensor::filled(&[1, dim], 1.0)),
            gamma: store.add(format!("{prefix}.gamma"), Tensor::filled(&[1, dim], 1.0)),
            beta: store.add(format!("{prefix}.beta"), Tensor::zeros(&[1, dim])),
            dim,
        }
    }

    pub fn num_params(&self) -> usize {
        3 * self.dim
    }
}

/// `gamma * (x - alpha * mean) / sqrt(var + eps) + beta`, statistics over the
/// rows of one graph; `var` is the mean square of the shifted features.
pub fn graph_norm(tape: &mut Tape, store: &ParamStore, p: &GraphNormParams, x: Var) -> Result<Var> {
    let (n, d) = tape.value(x).dims2("graph_norm")?;
    if d != p.dim {
        return Err(Error::shape("graph_norm", &[n, p.dim], tape.shape(x)));
    }
    let alpha = tape.param(store, p.alpha);
    let gamma = tape.param(store, p.gamma);
    let beta = tape.param(store, p.beta);

    let mean = tape.col_mean(x)?;
    let shift = tape.mul(alpha, mean)?;
    let shift = tape.broadcast_rows(shift, n)?;
    let centered = tape.sub(x, shift)?;
    let sq = tape.mul(centered, centered)?;
    let var = tape.col_mean(sq)?;
    let var = tape.add_scalar(var, GRAPH_NORM_EPS);
    let inv_std = tape.rsqrt(var);
    let scale = tape.mul(gamma, inv_std)?;
    let scale = tape.broadcast_rows(scale, n)?;
    let normed = tape.mul(centered, scale)?;
    let beta = tape.broadcast_rows(beta, n)?;
    tape.add(normed, beta)
}

/// Graph transformer block: layer, GraphNorm, ReLU.
#[derive(Clone, Debug)]
pub struct Gtb {
    pub layer: GtLayerParams,
    pub norm: GraphNormParams,
}

impl Gtb {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        d_out: usize,
        heads: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let layer = GtLayerParams::new(store, &format!("{prefix}.gt"), d_in, d_h, d_out, heads, dropout, rng)?;
        let norm = GraphNormParams::new(store, &format!("{prefix}.norm"), d_out);
        Ok(Gtb { layer, norm })
    }

    pub fn num_params(&self) -> usize {
        self.layer.num_params() + self.norm.num_params()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        graph: &MessageGraph,
        edge_weights: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<(Var, LayerStats)> {
        gtb_forward(tape, store, &self.layer, &self.norm, x, graph, edge_weights, training, rng)
    }
}

pub fn gtb_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &GtLayerParams,
    norm: &GraphNormParams,
    x: Var,
    graph: &MessageGraph,
    edge_weights: Var,
    training: bool,
    rng: &mut R,
) -> Result<(Var, LayerStats)> {
    let layer_out = gt_layer_forward(tape, store, layer, x, graph, edge_weights, training, rng)?;
    let h = graph_norm(tape, store, norm, layer_out.out)?;
    Ok((tape.relu(h), layer_out.stats))
}
