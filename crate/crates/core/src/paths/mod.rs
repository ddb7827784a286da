//! Local minimal paths with a coherence decision, and window-bounded
//! percolation seeded from a preselected candidate set.

mod minpath;
mod percolation;

pub use minpath::{
    coherence, greedy_arm, minimal_paths, MinimalPathParams, PathNeighborhoods, COHERENCE_EPS,
};
pub use percolation::{hessian_percolation, percolate, percolation_counts, PercolationParams};
