use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{auc, fit, Method};
use crate::graph::{make_split, Graph, Protocol};
use crate::rng::{stream_seed, Rng};
use crate::{Error, Result, Scalar, Tensor};

/// Fraction of undirected edges held out as test positives.
pub const TEST_FRACTION: f64 = 0.10;
/// Fraction held out as validation positives.
pub const VAL_FRACTION: f64 = 0.05;

/// Edge holdout: the training graph lacks every val/test positive.
#[derive(Debug, Clone)]
pub struct LinkSplit<T> {
    pub train_graph: Graph<T>,
    pub val_pos: Vec<(u32, u32)>,
    pub val_neg: Vec<(u32, u32)>,
    pub test_pos: Vec<(u32, u32)>,
    pub test_neg: Vec<(u32, u32)>,
}

/// Holds out 10% / 5% of edges as test / val positives and draws as many
/// distinct uniform non-edges as negatives.
pub fn link_split<T: Scalar>(g: &Graph<T>, seed: u64) -> Result<LinkSplit<T>> {
    let mut edges: Vec<(u32, u32)> = g.undirected_edges().collect();
    let m = edges.len();
    let n_test = (m as f64 * TEST_FRACTION).round() as usize;
    let n_val = (m as f64 * VAL_FRACTION).round() as usize;
    if n_test == 0 {
        return Err(Error::Eval(format!("{m} edges are too few to hold out a test positive")));
    }
    let n = g.n_nodes() as u64;
    let non_edges = n * n.saturating_sub(1) / 2 - m as u64;
    if non_edges < (n_test + n_val) as u64 {
        return Err(Error::Eval(format!(
            "graph has {non_edges} non-edges, fewer than the {} negatives needed",
            n_test + n_val
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let test_pos = edges[..n_test].to_vec();
    let val_pos = edges[n_test..n_test + n_val].to_vec();
    let train_graph = g.with_undirected_edges(&edges[n_test + n_val..])?;

    let mut taken = HashSet::new();
    let mut draw = |k: usize| {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let a = rng.random_range(0..n as u32);
            let b = rng.random_range(0..n as u32);
            let (a, b) = (a.min(b), a.max(b));
            if a == b || g.has_edge(a as usize, b as usize) || !taken.insert((a, b)) {
                continue;
            }
            out.push((a, b));
        }
        out
    };
    let test_neg = draw(n_test);
    let val_neg = draw(n_val);
    Ok(LinkSplit {
        train_graph,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

fn dot_scores<T: Scalar>(emb: &Tensor<T>, pairs: &[(u32, u32)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| {
            emb.row(u as usize)
                .iter()
                .zip(emb.row(v as usize))
                .map(|(a, b)| a.as_f64() * b.as_f64())
                .sum()
        })
        .collect()
}

/// AUC of dot-product scores `⟨h_u, h_v⟩` separating `pos` from `neg`.
pub fn link_predict_auc<T: Scalar>(emb: &Tensor<T>, pos: &[(u32, u32)], neg: &[(u32, u32)]) -> Result<f64> {
    auc(&dot_scores(emb, pos), &dot_scores(emb, neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub val_auc: Option<f64>,
    pub test_auc: f64,
}

/// Trains `method` on the edge-holdout graph and scores its frozen embeddings.
/// Supervised methods get a transductive node split of the training graph.
pub fn eval_linkpred<T: Scalar>(method: &Method, g: &Graph<T>, seed: u64) -> Result<LinkResult> {
    let split = link_split(g, stream_seed(seed, "linksplit"))?;
    let tg = &split.train_graph;
    let nodes = match method {
        Method::SimMlp { .. } => crate::graph::SplitSpec {
            protocol: Protocol::Transductive,
            seed,
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
            inductive: Vec::new(),
        },
        _ => make_split(tg, Protocol::Transductive, stream_seed(seed, "split"))?,
    };
    let model = fit(&method.with_seed(seed), tg, &nodes)?;
    let emb = model.embed(tg)?;
    let val_auc = if split.val_pos.is_empty() {
        None
    } else {
        Some(link_predict_auc(&emb, &split.val_pos, &split.val_neg)?)
    };
    Ok(LinkResult {
        val_auc,
        test_auc: link_predict_auc(&emb, &split.test_pos, &split.test_neg)?,
    })
}
