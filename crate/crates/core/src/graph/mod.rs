//! Attributed graphs, split masks and class statistics.

mod adjacency;
mod io;
mod sbm;
mod split;

use std::path::PathBuf;
use std::sync::Arc;

pub use adjacency::Adjacency;
pub use io::{load_graph, write_edges, write_features, write_graph, write_labels, GraphFiles};
pub use sbm::{generate_sbm_graph, SbmConfig};
pub use split::{
    imbalance_ratio, make_artificial_imbalance, make_artificial_imbalance_with_rng, select_minority_classes,
    stratified_split, ClassStats, ImbalanceConfig, SplitMasks,
};

use crate::autodiff::Mat;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}: node id {id} out of range for {n} nodes")]
    NodeRange {
        path: PathBuf,
        line: usize,
        id: usize,
        n: usize,
    },
    #[error("class {class} has no labeled training nodes")]
    EmptyClass { class: usize },
    #[error("class {class} has {available} labeled nodes, {requested} requested")]
    InsufficientLabels {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// Immutable attributed graph: symmetric 0/1 adjacency, dense features and
/// per-node labels (`None` for unlabeled nodes).
#[derive(Clone, Debug)]
pub struct Graph {
    adjacency: Arc<Adjacency>,
    features: Mat,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Graph {
    pub fn new(
        adjacency: Adjacency,
        features: Mat,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self, GraphError> {
        let n = adjacency.num_nodes();
        if features.rows() != n {
            return Err(GraphError::Invalid(format!(
                "{} feature rows for {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(GraphError::Invalid(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(GraphError::Invalid(format!("label {bad} outside 0..{num_classes}")));
        }
        if !adjacency.is_symmetric() {
            return Err(GraphError::Invalid("adjacency is not symmetric".into()));
        }
        if !features.is_finite() {
            return Err(GraphError::Invalid("non-finite feature value".into()));
        }
        Ok(Self {
            adjacency: Arc::new(adjacency),
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn adjacency(&self) -> &Arc<Adjacency> {
        &self.adjacency
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    /// Labeled node ids of class `c`, ascending.
    pub fn nodes_of_class(&self, c: usize) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.labels[v] == Some(c)).collect()
    }

    /// Relabels nodes so that node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n);
        let mut features = Mat::zeros(n, self.feature_dim());
        let mut labels = vec![None; n];
        for v in 0..n {
            features.row_mut(perm[v]).copy_from_slice(self.features.row(v));
            labels[perm[v]] = self.labels[v];
        }
        Graph {
            adjacency: Arc::new(self.adjacency.permuted(perm)),
            features,
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Same structure and labels with a different feature matrix.
    pub fn with_features(&self, features: Mat) -> Result<Graph, GraphError> {
        Graph::new(
            (*self.adjacency).clone(),
            features,
            self.labels.clone(),
            self.num_classes,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_label() {
        let adj = Adjacency::empty(2);
        let err = Graph::new(adj, Mat::zeros(2, 1), vec![Some(0), Some(2)], 2).unwrap_err();
        assert!(err.to_string().contains("label 2"));
    }

    #[test]
    fn rejects_feature_row_mismatch() {
        let adj = Adjacency::empty(3);
        assert!(Graph::new(adj, Mat::zeros(2, 1), vec![None; 3], 1).is_err());
    }
}
