//! Message-passing graph neural networks with random node identifiers.
//!
//! The crate bundles everything needed to train GraphConv networks whose
//! inputs are augmented with random node features, to push them towards
//! invariance with respect to those features through a contrastive term, and
//! to measure the outcome:
//!
//! - [`graph`]: graphs, generators, triangle labels, 1-WL refinement and an
//!   exact isomorphism test.
//! - [`diffmath`]: dense tensors, a reverse-mode tape and Adam.
//! - [`gnn`]: the GraphConv model and random-feature augmentation.
//! - [`training`]: constant, RNI and SIRI training loops.
//! - [`invariance`]: per-node prediction-flip ratios under resampling.
//! - [`separation`]: pairwise distinguishing harness.
//! - [`oracles`]: symbolic identifier-matching constructions.
//! - [`experiments`]: canned end-to-end runs and manifests.

pub mod diffmath;
mod error;
pub mod experiments;
pub mod gnn;
pub mod graph;
pub mod invariance;
mod kv;
pub mod oracles;
pub mod seed;
pub mod separation;
pub mod training;

pub use kv::{KvFile, Section};

pub use error::{Error, Result};
