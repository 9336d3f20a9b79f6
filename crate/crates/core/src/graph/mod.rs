//! Graph storage, dataset I/O, normalization, splits, augmentation and noise.

mod augment;
mod io;
mod normalize;
mod split;
pub mod synthetic;

pub use augment::{
    augment, inject_edge_noise, inject_feature_noise, AugmentedView, MaskMode, DEFAULT_PAIR_CAP,
};
pub use io::{load_dataset, load_splits, save_dataset, save_splits, DatasetMeta, SplitsFile};
pub use normalize::{normalize, propagate, NormalizedAdjacency, Scheme};
pub use split::{induced_subgraph, make_split, subgraph_without, Protocol, SplitSpec};

use crate::{Error, Result, Scalar, Tensor};

/// Label value meaning "no label" on disk.
pub const UNLABELED: u32 = u32::MAX;

/// Undirected graph in CSR form with node features and optional labels.
///
/// The adjacency is symmetric, deduplicated and free of self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    pub features: Tensor<T>,
    pub labels: Vec<Option<u32>>,
    pub n_classes: usize,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph from arbitrary directed edge records; they are
    /// symmetrized, deduplicated and self-loops dropped.
    pub fn from_edges(
        n_nodes: usize,
        edges: &[(u32, u32)],
        features: Tensor<T>,
        labels: Vec<Option<u32>>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.rows() != n_nodes {
            return Err(Error::Shape {
                op: "Graph::from_edges",
                left: (n_nodes, 0),
                right: features.shape(),
            });
        }
        if labels.len() != n_nodes {
            return Err(Error::Config(format!(
                "{} labels for {} nodes",
                labels.len(),
                n_nodes
            )));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&l| l as usize >= n_classes) {
            return Err(Error::Config(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(s, d) in edges {
            if s as usize >= n_nodes || d as usize >= n_nodes {
                return Err(Error::Config(format!(
                    "edge ({s}, {d}) out of range for {n_nodes} nodes"
                )));
            }
            if s != d {
                pairs.push((s, d));
                pairs.push((d, s));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(n_nodes, &pairs, features, labels, n_classes))
    }

    /// `pairs` must be sorted, deduplicated, symmetric and loop-free.
    pub(crate) fn from_sorted_pairs(
        n_nodes: usize,
        pairs: &[(u32, u32)],
        features: Tensor<T>,
        labels: Vec<Option<u32>>,
        n_classes: usize,
    ) -> Self {
        let mut offsets = vec![0usize; n_nodes + 1];
        for &(s, _) in pairs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        Graph {
            offsets,
            targets: pairs.iter().map(|&(_, d)| d).collect(),
            features,
            labels,
            n_classes,
        }
    }

    /// Unlabeled graph with the given undirected edges.
    pub fn unlabeled(n_nodes: usize, edges: &[(u32, u32)], features: Tensor<T>) -> Result<Self> {
        Self::from_edges(n_nodes, edges, features, vec![None; n_nodes], 0)
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Number of stored (directed) adjacency entries, twice the edge count.
    #[inline]
    pub fn n_directed_edges(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// Undirected edges as `(i, j)` with `i < j`, in CSR order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_nodes()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| (j as usize) > i)
                .map(move |&j| (i as u32, j))
        })
    }

    /// Directed adjacency entries `(i, j)` in CSR order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_nodes()).flat_map(move |i| self.neighbors(i).iter().map(move |&j| (i as u32, j)))
    }

    /// Same nodes, features and labels with a new undirected edge set.
    pub fn with_undirected_edges(&self, edges: &[(u32, u32)]) -> Result<Self> {
        Self::from_edges(
            self.n_nodes(),
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.n_classes,
        )
    }

    /// Same structure and labels with new features.
    pub fn with_features(&self, features: Tensor<T>) -> Result<Self> {
        if features.rows() != self.n_nodes() {
            return Err(Error::Shape {
                op: "with_features",
                left: self.features.shape(),
                right: features.shape(),
            });
        }
        Ok(Graph {
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            features,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        })
    }

    pub fn has_labels(&self) -> bool {
        self.n_classes > 0 && self.labels.iter().any(Option::is_some)
    }

    pub fn cast<U: Scalar>(&self) -> Graph<U> {
        Graph {
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            features: self.features.cast(),
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Checks the CSR invariants; used by tests and after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.offsets[0] != 0 || *self.offsets.last().unwrap() != self.targets.len() {
            return Err(Error::State("CSR offsets do not cover targets".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::State("CSR offsets decrease".into()));
        }
        for i in 0..n {
            let nb = self.neighbors(i);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::State(format!("row {i} not sorted/deduplicated")));
            }
            for &j in nb {
                if j as usize == i {
                    return Err(Error::State(format!("self-loop at {i}")));
                }
                if j as usize >= n || !self.has_edge(j as usize, i) {
                    return Err(Error::State(format!("edge ({i}, {j}) not symmetric")));
                }
            }
        }
        Ok(())
    }
}
