//! Weighted co-occurrence networks over extracted technology terms.
//!
//! [`network`] builds and filters the undirected weighted graph, [`stats`]
//! computes its descriptive measures, [`community`] detects communities by
//! modularity (a greedy agglomerative method and an edge-removal divisive
//! method), and [`export`] round-trips the graph through GEXF, GraphML,
//! and CSV.

pub mod community;
pub mod export;
pub mod network;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on {0:?} is not allowed")]
    SelfLoop(String),
    #[error("edge weight must be positive")]
    ZeroWeight,
    #[error("partition does not assign node {0:?}")]
    Unassigned(String),
    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

pub use community::{girvan_newman, louvain, modularity, CommunityResult};
pub use export::{from_csv, from_gexf, to_csv, to_gexf, to_graphml};
pub use network::{build_network, TechNetwork};
pub use stats::{compute_stats, NetworkStats};
