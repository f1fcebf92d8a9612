//! STP-GSR and the two node-space baselines.
//!
//! All three models map a low-resolution connectome (`n_s` nodes) to a
//! high-resolution one (`n_t` nodes). Predictions are produced as the strict
//! upper triangle and folded back into a symmetric zero-diagonal matrix, so
//! structural validity never depends on the learned weights.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{build_dual_complete, pair_count, Connectome, DualTopology, MessageGraph};
use crate::layers::{Gtb, LayerStats};

/// Attention heads of node-space blocks.
pub const NODE_HEADS: usize = 4;
/// Attention dropout of node-space blocks.
pub const NODE_DROPOUT: f64 = 0.2;
/// Weight of the low-resolution reconstruction term in the autoencoder loss.
pub const RECON_WEIGHT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    StpGsr,
    DirectSr,
    Autoencoder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::StpGsr, ModelKind::DirectSr, ModelKind::Autoencoder];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::StpGsr => "stp_gsr",
            ModelKind::DirectSr => "direct_sr",
            ModelKind::Autoencoder => "autoencoder",
        }
    }

    /// Published parameter counts (millions) at 160 -> 268 nodes, printed for comparison.
    pub fn reference_params_millions(self) -> f64 {
        match self {
            ModelKind::StpGsr => 0.174,
            ModelKind::DirectSr => 1.103,
            ModelKind::Autoencoder => 2.205,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stp_gsr" => Ok(ModelKind::StpGsr),
            "direct_sr" => Ok(ModelKind::DirectSr),
            "autoencoder" => Ok(ModelKind::Autoencoder),
            other => Err(Error::Validation(format!(
                "unknown model kind {other:?} (expected stp_gsr, direct_sr or autoencoder)"
            ))),
        }
    }
}

fn head_dim(width: usize) -> usize {
    width.div_ceil(NODE_HEADS)
}

fn node_gtb_params(d_in: usize, d_out: usize) -> usize {
    let d_h = head_dim(d_out);
    NODE_HEADS * (4 * d_in * d_h + d_h) + NODE_HEADS * d_h * d_out + 3 * d_out
}

/// Parameter count of a model without building it.
pub fn param_count(kind: ModelKind, n_s: usize, n_t: usize) -> usize {
    // Single-head scalar block on the dual graph: w1..w4, w6, w0 and three norm scalars.
    let dual = 6 + 3;
    match kind {
        ModelKind::StpGsr => node_gtb_params(n_s, n_t) + dual,
        ModelKind::DirectSr => node_gtb_params(n_s, n_t) + node_gtb_params(n_t, n_t),
        ModelKind::Autoencoder => {
            node_gtb_params(n_s, n_t) + node_gtb_params(n_t, n_t) + node_gtb_params(n_t, n_s)
        }
    }
}

/// Target edge initializer plus dual graph learner.
#[derive(Clone, Debug)]
pub struct StpGsrModel {
    pub node_gtb: Gtb,
    pub dual_gtb: Gtb,
    pub dual: Arc<DualTopology>,
    dual_graph: Arc<MessageGraph>,
}

/// Two stacked node-space blocks followed by a Gram product.
#[derive(Clone, Debug)]
pub struct DirectSrModel {
    pub first: Gtb,
    pub second: Gtb,
}

/// DirectSR encoder followed by a block that maps back to the source resolution.
#[derive(Clone, Debug)]
pub struct AutoencoderModel {
    pub encoder: DirectSrModel,
    pub decoder: Gtb,
    hr_graph: Arc<MessageGraph>,
    hr_flat: Arc<[u32]>,
}

#[derive(Clone, Debug)]
pub enum Architecture {
    StpGsr(StpGsrModel),
    DirectSr(DirectSrModel),
    Autoencoder(AutoencoderModel),
}

/// A model with its parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub kind: ModelKind,
    pub n_s: usize,
    pub n_t: usize,
    pub seed: u64,
    pub arch: Architecture,
    pub params: ParamStore,
    lr_graph: Arc<MessageGraph>,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Predicted high-resolution upper triangle, `m_t x 1`.
    pub hr_upper: Var,
    /// Reconstructed low-resolution upper triangle (autoencoder only).
    pub lr_upper: Option<Var>,
    /// Initial edge features `X_t^0` (STP-GSR only).
    pub edge_init: Option<Var>,
    /// Counters from the dual-graph block (STP-GSR only).
    pub dual_stats: Option<LayerStats>,
}

impl Model {
    pub fn new(kind: ModelKind, n_s: usize, n_t: usize, seed: u64) -> Result<Self> {
        if n_s < 2 || n_t < 2 {
            return Err(Error::Domain(format!("model needs n_s, n_t >= 2, got {n_s}, {n_t}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let direct = |params: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str| -> Result<DirectSrModel> {
            Ok(DirectSrModel {
                first: Gtb::new(params, &format!("{prefix}.gtb1"), n_s, head_dim(n_t), n_t, NODE_HEADS, NODE_DROPOUT, rng)?,
                second: Gtb::new(params, &format!("{prefix}.gtb2"), n_t, head_dim(n_t), n_t, NODE_HEADS, NODE_DROPOUT, rng)?,
            })
        };
        let arch = match kind {
            ModelKind::StpGsr => {
                let node_gtb = Gtb::new(&mut params, "init", n_s, head_dim(n_t), n_t, NODE_HEADS, NODE_DROPOUT, &mut rng)?;
                let dual_gtb = Gtb::new(&mut params, "dual", 1, 1, 1, 1, 0.0, &mut rng)?;
                let dual = build_dual_complete(n_t)?;
                let dual_graph = MessageGraph::from_dual(&dual);
                Architecture::StpGsr(StpGsrModel {
                    node_gtb,
                    dual_gtb,
                    dual: Arc::new(dual),
                    dual_graph: Arc::new(dual_graph),
                })
            }
            ModelKind::DirectSr => Architecture::DirectSr(direct(&mut params, &mut rng, "direct")?),
            ModelKind::Autoencoder => {
                let encoder = direct(&mut params, &mut rng, "encoder")?;
                let decoder = Gtb::new(&mut params, "decoder", n_t, head_dim(n_s), n_s, NODE_HEADS, NODE_DROPOUT, &mut rng)?;
                let hr_graph = MessageGraph::complete(n_t);
                let hr_flat = hr_graph.flat_indices();
                Architecture::Autoencoder(AutoencoderModel {
                    encoder,
                    decoder,
                    hr_graph: Arc::new(hr_graph),
                    hr_flat,
                })
            }
        };
        Ok(Model {
            kind,
            n_s,
            n_t,
            seed,
            arch,
            params,
            lr_graph: Arc::new(MessageGraph::complete(n_s)),
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    fn check_input(&self, a_s: &Connectome) -> Result<()> {
        if a_s.n() != self.n_s {
            return Err(Error::shape("model input", &[self.n_s, self.n_s], &[a_s.n(), a_s.n()]));
        }
        Ok(())
    }

    /// Records the forward pass of `a_s` on `tape`, reading weights from `store`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        a_s: &Connectome,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Forward> {
        self.check_input(a_s)?;
        let x0 = tape.constant(Tensor::matrix(self.n_s, self.n_s, a_s.weights().to_vec())?);
        let ew = tape.constant(Tensor::column(self.lr_graph.weights_from(a_s.weights())));
        match &self.arch {
            Architecture::StpGsr(m) => {
                let (xs1, _) = m.node_gtb.forward(tape, store, x0, &self.lr_graph, ew, training, rng)?;
                let init = gram_minmax(tape, xs1)?;
                let dual_x = tape.upper_tri(init)?;
                let ones = tape.constant(Tensor::filled(&[m.dual_graph.arc_count(), 1], 1.0));
                let (out, stats) = m.dual_gtb.forward(tape, store, dual_x, &m.dual_graph, ones, training, rng)?;
                Ok(Forward {
                    hr_upper: out,
                    lr_upper: None,
                    edge_init: Some(init),
                    dual_stats: Some(stats),
                })
            }
            Architecture::DirectSr(m) => {
                let hr = direct_upper(tape, store, m, x0, &self.lr_graph, ew, training, rng)?;
                Ok(Forward {
                    hr_upper: hr,
                    lr_upper: None,
                    edge_init: None,
                    dual_stats: None,
                })
            }
            Architecture::Autoencoder(m) => {
                let hr = direct_upper(tape, store, &m.encoder, x0, &self.lr_graph, ew, training, rng)?;
                let a_t = tape.devectorize(hr, self.n_t)?;
                let hr_ew = tape.gather_flat(a_t, m.hr_flat.clone())?;
                let (z, _) = m.decoder.forward(tape, store, a_t, &m.hr_graph, hr_ew, training, rng)?;
                let recon = gram_minmax(tape, z)?;
                let lr = tape.upper_tri(recon)?;
                Ok(Forward {
                    hr_upper: hr,
                    lr_upper: Some(lr),
                    edge_init: None,
                    dual_stats: None,
                })
            }
        }
    }

    /// Training objective for one `(lr, hr)` pair: L1 on the upper triangle,
    /// plus the weighted reconstruction term for the autoencoder.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        a_s: &Connectome,
        a_t: &Connectome,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var> {
        if a_t.n() != self.n_t {
            return Err(Error::shape("model target", &[self.n_t, self.n_t], &[a_t.n(), a_t.n()]));
        }
        let fwd = self.forward(tape, store, a_s, training, rng)?;
        let target = tape.constant(Tensor::column(a_t.upper_tri_vectorize()));
        let loss = tape.l1_loss(fwd.hr_upper, target)?;
        match fwd.lr_upper {
            Some(lr) => {
                let lr_target = tape.constant(Tensor::column(a_s.upper_tri_vectorize()));
                let recon = tape.l1_loss(lr, lr_target)?;
                let recon = tape.scale(recon, RECON_WEIGHT);
                tape.add(loss, recon)
            }
            None => Ok(loss),
        }
    }

    /// Evaluation-mode prediction of the high-resolution connectome.
    pub fn predict(&self, a_s: &Connectome) -> Result<Connectome> {
        Ok(self.predict_all(a_s)?.0)
    }

    /// High-resolution prediction and, for the autoencoder, the reconstruction.
    pub fn predict_all(&self, a_s: &Connectome) -> Result<(Connectome, Option<Connectome>)> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let fwd = self.forward(&mut tape, &self.params, a_s, false, &mut rng)?;
        let hr = Connectome::devectorize(tape.value(fwd.hr_upper).data(), self.n_t)?;
        let lr = fwd
            .lr_upper
            .map(|v| Connectome::devectorize(tape.value(v).data(), self.n_s))
            .transpose()?;
        Ok((hr, lr))
    }

    pub fn dual_topology(&self) -> Option<&DualTopology> {
        match &self.arch {
            Architecture::StpGsr(m) => Some(&m.dual),
            _ => None,
        }
    }

    /// Expected dual-stage counters: `m` rows and `2 * |E'|` arcs.
    pub fn expected_dual_counts(&self) -> (usize, usize) {
        let n = self.n_t;
        (pair_count(n), n * (n - 1) * (n - 2))
    }
}

/// `minmax(Z^T Z)` for node embeddings `Z` (`n x k`), giving a `k x k` matrix.
fn gram_minmax(tape: &mut Tape, z: Var) -> Result<Var> {
    let zt = tape.transpose(z)?;
    let gram = tape.matmul(zt, z)?;
    tape.minmax_scale(gram)
}

#[allow(clippy::too_many_arguments)]
fn direct_upper(
    tape: &mut Tape,
    store: &ParamStore,
    m: &DirectSrModel,
    x0: Var,
    graph: &MessageGraph,
    ew: Var,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Var> {
    let (h, _) = m.first.forward(tape, store, x0, graph, ew, training, rng)?;
    let (z, _) = m.second.forward(tape, store, h, graph, ew, training, rng)?;
    let hr = gram_minmax(tape, z)?;
    tape.upper_tri(hr)
}
