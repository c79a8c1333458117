//! Greedy permutations and greedy trees on finite metric spaces.
//!
//! Everything is built on an incremental finite Voronoi diagram ([`fvd`]):
//! Clarkson's algorithm with an exact heap, a bucket-queue variant with a
//! backburner, linear-time merging of greedy trees, recursive tree building
//! and refinement of a tree into a `(1 + 1/n)`-approximate greedy
//! permutation. [`verify`] holds brute-force oracles for every invariant.
//!
//! The library is generic over `f32` and `f64`; the aliases at the crate
//! root fix `f64`.

pub mod algorithms;
pub mod error;
pub mod fvd;
pub mod generate;
pub mod greedy_tree;
pub mod metric;
pub mod queues;
pub mod scalar;
pub mod verify;

pub use algorithms::{
    clarkson, clarkson_bb, clarkson_observed, gonzalez, gt_build, gt_merge, gt_refine, BbOptions,
    NoObserver, Observer, RunTelemetry,
};
pub use error::{Error, Result};
pub use fvd::FvdConfig;
pub use generate::Generator;
pub use greedy_tree::{NodeId, TreeParams};
pub use metric::{DistanceCounter, Metric, Norm, PointId};
pub use queues::BackburnerOrder;
pub use scalar::Scalar;

/// Coordinate space over `f64`.
pub type Space = metric::CoordSpace<f64>;
/// Greedy tree over `f64`.
pub type Tree = greedy_tree::GreedyTree<f64>;
/// Permutation over `f64`.
pub type Perm = greedy_tree::Permutation<f64>;
/// Coordinate space over `f32`.
pub type Space32 = metric::CoordSpace<f32>;
/// Greedy tree over `f32`.
pub type Tree32 = greedy_tree::GreedyTree<f32>;
/// Permutation over `f32`.
pub type Perm32 = greedy_tree::Permutation<f32>;
