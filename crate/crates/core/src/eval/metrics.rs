use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MadDistance {
    /// `1 − cos(h_i, h_j)`, in `[0, 2]`.
    #[default]
    Cosine,
    /// `‖h_i − h_j‖²`.
    SquaredL2,
}

/// Mean distance between embeddings of adjacent nodes over directed edges.
pub fn mad_smoothness<T: Scalar>(emb: &Tensor<T>, g: &Graph<T>, dist: MadDistance) -> Result<f64> {
    if emb.rows() != g.n_nodes() {
        return Err(Error::Shape {
            op: "mad_smoothness",
            left: emb.shape(),
            right: (g.n_nodes(), emb.cols()),
        });
    }
    if g.n_edges() == 0 {
        return Err(Error::Eval("smoothness needs at least one edge".into()));
    }
    let sq: Vec<f64> = (0..emb.rows())
        .map(|i| emb.row(i).iter().map(|v| v.as_f64().powi(2)).sum::<f64>())
        .collect();
    let mut total = 0.0;
    for (i, j) in g.directed_edges() {
        let (i, j) = (i as usize, j as usize);
        let (a, b) = (emb.row(i), emb.row(j));
        total += match dist {
            MadDistance::Cosine => {
                for k in [i, j] {
                    if sq[k] == 0.0 {
                        return Err(Error::Eval(format!("node {k} has a zero-norm embedding")));
                    }
                }
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum();
                // sqrt(s·s) == s exactly, so identical rows give exactly 0
                1.0 - dot / (sq[i] * sq[j]).sqrt()
            }
            MadDistance::SquaredL2 => a.iter().zip(b).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum(),
        };
    }
    Ok(total / g.n_directed_edges() as f64)
}

/// `tr(ŶᵀAŶ) / tr(ŶᵀDŶ)` for one-hot hard predictions: the fraction of
/// directed edges whose endpoints share a predicted class.
pub fn mincut_score<T: Scalar>(pred: &[usize], g: &Graph<T>) -> Result<f64> {
    if pred.len() != g.n_nodes() {
        return Err(Error::Eval(format!("{} predictions for {} nodes", pred.len(), g.n_nodes())));
    }
    if g.n_directed_edges() == 0 {
        return Ok(0.0);
    }
    let same = g.directed_edges().filter(|&(i, j)| pred[i as usize] == pred[j as usize]).count();
    Ok(same as f64 / g.n_directed_edges() as f64)
}

/// Area under the ROC curve by the Mann–Whitney rank statistic (midranks for ties).
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Eval("AUC needs at least one positive and one negative pair".into()));
    }
    if pos.iter().chain(neg).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("auc scores"));
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // twice the rank sum keeps midranks integral
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        rank2_pos += twice_mid * all[i..=j].iter().filter(|e| e.1).count() as u128;
        i = j + 1;
    }
    let np = pos.len() as u128;
    let twice_u = rank2_pos - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * neg.len() as u128) as f64)
}

/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` by enumerating every pair.
pub fn auc_brute_force(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Eval("AUC needs at least one positive and one negative pair".into()));
    }
    let mut twice: u128 = 0;
    for &p in pos {
        for &n in neg {
            twice += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    Ok(twice as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}
