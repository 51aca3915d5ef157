//! Discretized optimal transport solved as sparse linear programs.
//!
//! Marginals with densities are lumped onto the nodes of uniform P1 meshes,
//! the resulting transportation LP is solved on a small set of active pairs
//! predicted from approximate multipliers, and the prediction is verified on
//! the full product grid before moving to the next refinement level.

pub mod active_set;
pub mod cli;
pub mod measure;
pub mod mesh;
pub mod problems;
pub mod transport;
