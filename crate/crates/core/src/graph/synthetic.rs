//! Random graph generators for benchmarks and tests.

use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use super::Graph;
use crate::rng::Rng;
use crate::{Scalar, Tensor};

/// Erdős–Rényi graph with expected average degree `avg_degree`, i.i.d.
/// standard-normal features and uniformly random labels over 2 classes.
pub fn make_synthetic<T: Scalar>(n: usize, avg_degree: f64, d: usize, seed: u64) -> Graph<T> {
    make_synthetic_classes(n, avg_degree, d, 2, seed)
}

pub fn make_synthetic_classes<T: Scalar>(
    n: usize,
    avg_degree: f64,
    d: usize,
    n_classes: usize,
    seed: u64,
) -> Graph<T> {
    let mut rng = Rng::seed_from_u64(seed);
    let pairs = gnp_pairs(n, if n > 1 { avg_degree / (n - 1) as f64 } else { 0.0 }, &mut rng);
    let features = Tensor::from_fn(n, d, |_, _| T::of(StandardNormal.sample(&mut rng)));
    let labels = (0..n)
        .map(|_| Some(rng.random_range(0..n_classes.max(1)) as u32))
        .collect();
    Graph::from_edges(n, &pairs, features, labels, n_classes.max(1)).expect("generated graph is valid")
}

/// G(n, p) by geometric skipping over the `n(n−1)/2` pairs.
fn gnp_pairs(n: usize, p: f64, rng: &mut Rng) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if p <= 0.0 || n < 2 {
        return out;
    }
    if p >= 1.0 {
        for i in 0..n {
            for j in i + 1..n {
                out.push((i as u32, j as u32));
            }
        }
        return out;
    }
    let log_q = (1.0 - p).ln();
    // Walk the strictly-lower triangle (v > w) row by row.
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            out.push((w as u32, v as u32));
        }
    }
    out
}

/// Homophilous graph with class-dependent sparse binary features.
///
/// Each node draws `words_per_node` active feature dimensions; with
/// probability `signal` a word comes from its class's block of the
/// vocabulary, otherwise from the whole vocabulary. A fraction `homophily`
/// of the edges join nodes of the same class.
#[derive(Debug, Clone)]
pub struct PlantedPartition {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub avg_degree: f64,
    pub homophily: f64,
    pub words_per_node: usize,
    pub signal: f64,
}

impl PlantedPartition {
    pub fn generate<T: Scalar>(&self, seed: u64) -> Graph<T> {
        let mut rng = Rng::seed_from_u64(seed);
        let c = self.n_classes.max(1);
        let labels: Vec<u32> = (0..self.n_nodes).map(|_| rng.random_range(0..c) as u32).collect();
        let mut members = vec![Vec::new(); c];
        for (i, &l) in labels.iter().enumerate() {
            members[l as usize].push(i);
        }

        let block = (self.n_features / c).max(1);
        let mut x = Tensor::zeros(self.n_nodes, self.n_features);
        for (i, &l) in labels.iter().enumerate() {
            for _ in 0..self.words_per_node {
                let j = if rng.random::<f64>() < self.signal {
                    (l as usize * block + rng.random_range(0..block)).min(self.n_features - 1)
                } else {
                    rng.random_range(0..self.n_features)
                };
                x.set(i, j, T::one());
            }
        }

        let m = (self.n_nodes as f64 * self.avg_degree / 2.0).round() as usize;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let u = rng.random_range(0..self.n_nodes);
            let lu = labels[u] as usize;
            let v = if rng.random::<f64>() < self.homophily || c == 1 {
                members[lu][rng.random_range(0..members[lu].len())]
            } else {
                let mut other = rng.random_range(0..c - 1);
                if other >= lu {
                    other += 1;
                }
                if members[other].is_empty() {
                    continue;
                }
                members[other][rng.random_range(0..members[other].len())]
            };
            edges.push((u as u32, v as u32));
        }
        Graph::from_edges(
            self.n_nodes,
            &edges,
            x,
            labels.into_iter().map(Some).collect(),
            c,
        )
        .expect("generated graph is valid")
    }
}
