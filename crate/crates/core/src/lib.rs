//! Biased random walks on the range of high-dimensional random walks.
//!
//! The range of a two-sided walk in `Z^d` (`d >= 5`) is turned into a weighted
//! graph with conductance `beta^max(x1, y1)` on each edge. Cut-points split the
//! graph into segments, which reduces the biased walk on the range to a
//! one-dimensional walk in a random environment whose potential governs where
//! the walk localizes.

pub mod biased_walk;
pub mod cut_times;
pub mod environment;
pub mod error;
pub mod lattice;
pub mod lerw;
pub mod linalg;
pub mod range_graph;
pub mod rng;
pub mod rwre;
pub mod valleys;

pub use error::{Error, Result, Side};
pub use lattice::{sample_two_sided_srw, LatticePath, PathKind, Point};
