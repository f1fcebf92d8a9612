//! Primal connectomes, upper-triangle vectorization and line-graph duals.

mod connectome;
mod dual;
mod message;

pub use connectome::{pair_count, Connectome};
pub(crate) use connectome::devectorize_raw;
pub use dual::{
    build_dual_complete, build_dual_directed, build_dual_undirected, dual_index, dual_pair,
    line_graph_bruteforce, DualTopology,
};
pub use message::MessageGraph;
