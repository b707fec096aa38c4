//! Data ingestion, SPARQL feature retrieval, experiment orchestration and
//! result files around [`lodfm_core`].

pub mod cache;
pub mod checkpoint;
pub mod config;
pub mod fetch;
pub mod movielens;
pub mod pipeline;
pub mod plot;
pub mod replication;
pub mod report;
pub mod sparql;

pub use config::ExperimentConfig;
