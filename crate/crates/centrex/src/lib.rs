//! Covariance-aware mean-shift clustering.
//!
//! The central object is the generalized mean-shift map: a weighted
//! precision-mean of the data in which each point carries its own covariance
//! model and the weights come from a non-increasing kernel applied to squared
//! Mahalanobis distances. Fixed points of that map estimate cluster
//! centroids. The `pipeline` module wires the map into the full CENTREx
//! algorithm (pick, estimate, mark; fuse; assign), `baselines` provides
//! mean-shift-from-every-point, k-means++ and x-means for comparison, and
//! `bench` runs seeded benchmark sweeps over the synthetic generators in
//! `synth`.
//!
//! Everything is deterministic given a seed: all randomness flows through
//! explicitly passed ChaCha streams.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod meanshift;
pub mod metrics;
pub mod mle;
pub mod pipeline;
pub mod specfun;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CovarianceModel, Dataset, DatasetCovariances, Rotation};
pub use kernels::Kernel;
pub use pipeline::{centrex, CentrexConfig, ClusteringResult};
