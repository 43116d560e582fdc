//! Communication graphs: the per-round random samplers and the static
//! baselines they are compared against.

mod graph;
mod registry;
mod samplers;

pub use graph::RoundGraph;
pub use registry::{SamplerFactory, StaticTopology, TopologyRegistry, TopologySampler};
pub use samplers::{build_static, sample_regular_random, sample_s_out, sample_targets, TopologyKind};

/// In-neighbors of node `i`: the senders whose models `i` receives.
pub fn in_neighbors(graph: &RoundGraph, i: usize) -> crate::Result<Vec<usize>> {
    graph.in_neighbors(i)
}
