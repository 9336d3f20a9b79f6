use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::rng::Rng;
use crate::{Error, Result, Scalar};
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Transductive,
    Inductive,
    Coldstart,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Transductive => "transductive",
            Protocol::Inductive => "inductive",
            Protocol::Coldstart => "coldstart",
        }
    }

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(c: u64) -> Option<Self> {
        [Protocol::Transductive, Protocol::Inductive, Protocol::Coldstart]
            .into_iter()
            .find(|p| p.code() == c)
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" => Ok(Protocol::Transductive),
            "inductive" => Ok(Protocol::Inductive),
            "coldstart" | "cold-start" => Ok(Protocol::Coldstart),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Node partition for one protocol.
///
/// For inductive and cold-start protocols `train/val/test` partition the
/// transductive part `V^T` and `inductive` holds the unseen nodes `V^I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub protocol: Protocol,
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub inductive: Vec<usize>,
}

impl SplitSpec {
    /// Nodes visible during training (all nodes for transductive, `V^T` otherwise).
    pub fn visible(&self, n_nodes: usize) -> Vec<usize> {
        match self.protocol {
            Protocol::Transductive => (0..n_nodes).collect(),
            _ => {
                let mut v: Vec<usize> = self
                    .train
                    .iter()
                    .chain(&self.val)
                    .chain(&self.test)
                    .copied()
                    .collect();
                v.sort_unstable();
                v
            }
        }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = vec![false; n_nodes];
        for &i in self.train.iter().chain(&self.val).chain(&self.test).chain(&self.inductive) {
            if i >= n_nodes {
                return Err(Error::Config(format!("split index {i} >= {n_nodes}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("node {i} appears in two split sets")));
            }
        }
        if self.protocol == Protocol::Transductive && !self.inductive.is_empty() {
            return Err(Error::Config("transductive split with inductive nodes".into()));
        }
        Ok(())
    }
}

/// 10%/10%/80% rounded to nearest for train and val; test takes the rest.
fn ten_ten_eighty(nodes: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let n = nodes.len();
    let k = (n as f64 * 0.1).round() as usize;
    (
        nodes[..k].to_vec(),
        nodes[k..2 * k].to_vec(),
        nodes[2 * k..].to_vec(),
    )
}

/// Random node partition for `protocol`.
pub fn make_split<T: Scalar>(g: &Graph<T>, protocol: Protocol, seed: u64) -> Result<SplitSpec> {
    if !g.has_labels() {
        return Err(Error::Config("splitting needs a labeled graph".into()));
    }
    let n = g.n_nodes();
    let mut rng = Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (inductive, rest) = match protocol {
        Protocol::Transductive => (Vec::new(), order),
        Protocol::Inductive | Protocol::Coldstart => {
            let k = (n as f64 * 0.2).ceil() as usize;
            (order[..k].to_vec(), order[k..].to_vec())
        }
    };
    let (train, val, test) = ten_ten_eighty(&rest);
    Ok(SplitSpec {
        protocol,
        seed,
        train,
        val,
        test,
        inductive,
    })
}

/// Removes edges touching `removed` while keeping every node.
///
/// With `isolate_only = true` every edge incident to a removed node is
/// dropped, leaving those nodes isolated (cold-start view). With
/// `isolate_only = false` only edges crossing between `removed` and the rest
/// are dropped, so the removed nodes keep edges among themselves (the
/// inductive view where `V^I` is disconnected from `V^T`).
pub fn subgraph_without<T: Scalar>(g: &Graph<T>, removed: &[usize], isolate_only: bool) -> Graph<T> {
    let mut mark = vec![false; g.n_nodes()];
    for &i in removed {
        mark[i] = true;
    }
    let keep = |i: usize, j: usize| {
        if isolate_only {
            !mark[i] && !mark[j]
        } else {
            mark[i] == mark[j]
        }
    };
    let pairs: Vec<(u32, u32)> = g
        .directed_edges()
        .filter(|&(i, j)| keep(i as usize, j as usize))
        .collect();
    Graph::from_sorted_pairs(
        g.n_nodes(),
        &pairs,
        g.features.clone(),
        g.labels.clone(),
        g.n_classes,
    )
}

/// Subgraph induced by `nodes` (renumbered in the given order).
pub fn induced_subgraph<T: Scalar>(g: &Graph<T>, nodes: &[usize]) -> Graph<T> {
    let mut index = vec![u32::MAX; g.n_nodes()];
    for (new, &old) in nodes.iter().enumerate() {
        index[old] = new as u32;
    }
    let mut pairs = Vec::new();
    for (new, &old) in nodes.iter().enumerate() {
        for &j in g.neighbors(old) {
            let nj = index[j as usize];
            if nj != u32::MAX {
                pairs.push((new as u32, nj));
            }
        }
    }
    pairs.sort_unstable();
    Graph::from_sorted_pairs(
        nodes.len(),
        &pairs,
        g.features.gather_rows(nodes),
        nodes.iter().map(|&i| g.labels[i]).collect(),
        g.n_classes,
    )
}
