#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng as _, SeedableRng};
use simmlp::graph::{load_dataset, Graph, Scheme};
use simmlp::model::Mlp;
use simmlp::rng::Rng;
use simmlp::Tensor;

pub type Dense = Vec<Vec<f64>>;

/// Random undirected graph with edge probability `p`, uniform features in [-1, 1].
pub fn random_graph(n: usize, p: f64, d: usize, seed: u64) -> Graph<f64> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    let x = Tensor::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    Graph::unlabeled(n, &edges, x).unwrap()
}

/// `Ã = A + I` normalized entry by entry from the definitions.
pub fn dense_adj(g: &Graph<f64>, scheme: Scheme) -> Dense {
    let n = g.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for (i, j) in g.undirected_edges() {
        a[i as usize][j as usize] = 1.0;
        a[j as usize][i as usize] = 1.0;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                out[i][j] = match scheme {
                    Scheme::Bi => 1.0 / (deg[i] * deg[j]).sqrt(),
                    Scheme::Row => 1.0 / deg[i],
                    Scheme::Col => 1.0 / deg[j],
                };
            }
        }
    }
    out
}

pub fn to_dense(t: &Tensor<f64>) -> Dense {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|r| (0..m).map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn power_apply(a: &Dense, h: &Dense, k: usize) -> Dense {
    let mut cur = h.clone();
    for _ in 0..k {
        cur = matmul(a, &cur);
    }
    cur
}

pub fn prelu(h: &Dense, slope: f64) -> Dense {
    h.iter()
        .map(|r| r.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect())
        .collect()
}

/// Eval-mode MLP written out layer by layer.
pub fn mlp_eval(m: &Mlp<f64>, x: &Dense) -> Dense {
    let last = m.linears.len() - 1;
    let mut h = x.clone();
    for (l, lin) in m.linears.iter().enumerate() {
        let w = to_dense(&lin.weight);
        let mut y = matmul(&h, &w);
        for r in &mut y {
            for (v, b) in r.iter_mut().zip(lin.bias.row(0)) {
                *v += b;
            }
        }
        if l < last {
            if let Some(bn) = m.norms.get(l) {
                for r in &mut y {
                    for (j, v) in r.iter_mut().enumerate() {
                        let mean = bn.running_mean.get(0, j);
                        let var = bn.running_var.get(0, j);
                        *v = (*v - mean) / (var + bn.eps).sqrt() * bn.scale.get(0, j) + bn.shift.get(0, j);
                    }
                }
            }
            y = prelu(&y, m.acts[l].slope());
        }
        h = y;
    }
    h
}

/// Largest `|a − b| / max(1, |b|)`.
pub fn max_rel_diff(a: &Tensor<f64>, b: &Dense) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((a.get(i, j) - v).abs() / v.abs().max(1.0));
        }
    }
    worst
}

pub fn data_dir() -> Option<PathBuf> {
    std::env::var_os("SIMMLP_DATA_DIR").map(PathBuf::from)
}

/// Loads `$SIMMLP_DATA_DIR/<name>` or explains why it cannot.
pub fn real_dataset(name: &str) -> Result<Graph<f64>, String> {
    let root = data_dir().ok_or_else(|| format!("SIMMLP_DATA_DIR is not set; {name} dataset unavailable"))?;
    let dir = root.join(name);
    if !dir.join("meta.json").exists() {
        return Err(format!("{} not found", dir.display()));
    }
    load_dataset(&dir).map_err(|e| e.to_string())
}
