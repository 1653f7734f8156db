//! Graphs, the renormalized adjacency, dataset ingestion and structural checks.

mod adjacency;
mod io;
mod properties;
mod sbm;

pub use adjacency::normalized_adjacency;
pub use io::{load_dataset, load_dataset_dir, write_dataset, DatasetPaths, KnownDataset};
pub use properties::{graph_properties, GraphProperties};
pub use sbm::{sbm_generate, SbmParams};

use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::{CsrMatrix, DenseMatrix, LinalgError};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("edge ({u}, {v}) out of range for {num_nodes} nodes")]
    EdgeOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("self-loop on node {0}; self-loops are added only by renormalization")]
    SelfLoop(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Disjoint train/validation/test node masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }

    fn check(&self, n: usize) -> Result<(), GraphError> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(GraphError::Integrity(format!(
                "mask lengths ({}, {}, {}) differ from node count {n}",
                self.train.len(),
                self.val.len(),
                self.test.len()
            )));
        }
        for i in 0..n {
            let hits = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if hits > 1 {
                return Err(GraphError::Integrity(format!(
                    "node {i} belongs to more than one mask"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub avg_degree: f64,
}

/// An undirected attributed graph with labels, masks and its cached
/// renormalized adjacency. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    masks: Masks,
    norm_adj: CsrMatrix,
}

impl Graph {
    /// Validates and canonicalizes the inputs. Edges are stored once as
    /// `(min, max)` pairs; duplicates and reversed duplicates are dropped.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
        labels: Vec<usize>,
        masks: Masks,
    ) -> Result<Self, GraphError> {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange { u, v, num_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        if features.rows() != num_nodes {
            return Err(GraphError::Integrity(format!(
                "feature rows {} differ from node count {num_nodes}",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(GraphError::Integrity(format!(
                "label count {} differs from node count {num_nodes}",
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(GraphError::Integrity("non-finite feature value".into()));
        }
        masks.check(num_nodes)?;
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let norm_adj = normalized_adjacency(num_nodes, &canon);
        Ok(Self {
            num_nodes,
            edges: canon,
            features,
            labels,
            num_classes,
            masks,
            norm_adj,
        })
    }

    /// Structure-only graph: zero-width features, all labels 0, empty masks.
    pub fn from_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(
            num_nodes,
            edges,
            DenseMatrix::zeros(num_nodes, 0),
            vec![0; num_nodes],
            Masks::empty(num_nodes),
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    /// `D̃^{-1/2}(A + I)D̃^{-1/2}`.
    pub fn norm_adj(&self) -> &CsrMatrix {
        &self.norm_adj
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            num_nodes: self.num_nodes,
            num_edges: self.edges.len(),
            num_classes: self.num_classes,
            avg_degree: if self.num_nodes == 0 {
                0.0
            } else {
                2.0 * self.edges.len() as f64 / self.num_nodes as f64
            },
        }
    }

    /// Degrees of `A + I`.
    pub fn self_loop_degrees(&self) -> Vec<usize> {
        let mut deg = vec![1usize; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Copy with every nonzero feature row scaled to unit L1 norm.
    pub fn with_row_normalized_features(&self) -> Graph {
        let mut features = self.features.clone();
        for r in 0..features.rows() {
            let row = features.row_mut(r);
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Graph {
            features,
            ..self.clone()
        }
    }

    /// Every mask must select at least one node before the graph can be used
    /// for training.
    pub fn check_trainable(&self) -> Result<(), GraphError> {
        let (tr, va, te) = self.masks.counts();
        if tr == 0 || va == 0 || te == 0 {
            return Err(GraphError::Integrity(format!(
                "train/val/test masks must be nonempty (got {tr}/{va}/{te})"
            )));
        }
        Ok(())
    }
}
