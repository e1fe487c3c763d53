//! Finite-volume simulation of percolation-type models: Bernoulli bond
//! percolation and trifurcation counting, the random-cluster model, 2D
//! rigidity percolation, entanglement witnesses in `Z^3`, and random walks
//! in random reflecting labyrinths.

pub mod entanglement;
pub mod error;
pub mod graph;
pub mod harness;
pub mod labyrinth;
pub mod percolation;
pub mod random_cluster;
pub mod rigidity;
pub mod seed;
pub mod sets;
pub mod stats;
pub mod union_find;
pub mod uniqueness;

pub use error::{Error, Result};
pub use graph::{build_graph, isoperimetric_ratio, vertex_boundary, Ambient, FiniteGraph, LatticeSpec};
pub use percolation::{
    cluster_decomposition, connects, crossing_probability, estimate_pc, sample_bernoulli,
    ClusterLabels, Configuration,
};
pub use seed::{derive_seed, RngSeed};
pub use sets::{EdgeSet, VertexSet};
pub use stats::Estimate;
