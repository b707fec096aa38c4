//! Top-N recommendation with factorization machines trained on pairwise
//! (BPR) ranking loss over lightweight knowledge-graph item features.
//!
//! This crate is `no_std` and only needs `alloc`. It carries the model,
//! the training loop, the ranking baselines, the evaluation metrics and the
//! experiment orchestration. Everything that touches the network or the
//! file system lives in the `lodfm` companion crate.
//!
//! Feature vectors follow a fixed block layout: one-hot user, one-hot item,
//! then the item's property-object pairs, subject-property pairs and a
//! single PageRank column, each block enabled by a [`FeatureConfig`].

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod fm;
pub mod knowledge;
mod math;
pub mod query;
pub mod rng;
pub mod sparse;
pub mod synthetic;
pub mod training;

pub use dataset::{
    binarize_and_stats, split_train_test, DatasetStats, Interaction, InteractionDataset, ItemId,
    Partition, RatingRecord, UserId,
};
pub use error::{Error, Result};
pub use eval::{MetricReport, RankedList, Recommender};
pub use features::{assemble_example, build_feature_index, FeatureIndex};
pub use fm::{FmGradient, FmModel};
pub use knowledge::{normalize_pagerank, FeatureConfig, FeatureSet, ItemKnowledge};
pub use sparse::SparseVector;
pub use training::{Hyperparams, NegativeRegime, PairStrategy, TrainReport};
