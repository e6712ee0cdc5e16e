//! Clustering, cluster metrics, term weights, exact nearest neighbors and
//! t-SNE over representation matrices.

mod kmeans;
mod neighbors;
mod terms;
mod tsne;

pub use kmeans::{cluster_metrics, kmeans, ClusterReport, ClusterStats, KMeansParams};
pub use neighbors::{nearest_neighbors, Neighbor, NeighborConstraint, NeighborList, Query};
pub use terms::{aggregate_salient_terms, cluster_top_terms, word_cloud, TermFilter, TermWeight, TermWeights};
pub use tsne::{tsne, Projection, TsneParams};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyzeError {
    #[error("{requested} clusters requested for {rows} rows")]
    TooManyClusters { requested: usize, rows: usize },
    #[error("n_clusters must be at least 1")]
    NoClusters,
    #[error("tag {0} is absent from the corpus")]
    TagAbsent(String),
    #[error("row {0} has no matching example")]
    UnknownId(String),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("expected a {expected} representation")]
    WrongKind { expected: &'static str },
    #[error("empty selection")]
    EmptySubset,
    #[error("query vector has dimension {found}, representation has {expected}")]
    QueryDim { expected: usize, found: usize },
    #[error("query of the label constraint needs a prediction")]
    QueryLabel,
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error("t-SNE needs at least 2 rows")]
    TooFewRows,
}
