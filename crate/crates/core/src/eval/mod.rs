//! Probing, protocol scoring, link prediction, structure metrics and
//! robustness sweeps.

mod linkpred;
mod metrics;
mod probe;
mod protocol;
mod robustness;

use serde::{Deserialize, Serialize};

pub use linkpred::{eval_linkpred, link_predict_auc, link_split, LinkResult, LinkSplit};
pub use metrics::{auc, auc_brute_force, mad_smoothness, mincut_score, MadDistance};
pub use probe::{linear_probe, ProbeConfig, ProbeResult};
pub use protocol::{
    eval_coldstart, evaluate, fit, prod_accuracy, run_once, run_split, score_split, EvalOptions, Method, Readout, RunRecord,
    Scored,
};
pub use robustness::{curve_csv, robustness_sweep, subsample_labels, Axis, CurvePoint};

use crate::graph::Graph;
use crate::Scalar;

/// Fraction of labeled nodes in `idx` whose prediction matches; 0 when none is labeled.
pub fn accuracy<T: Scalar>(pred: &[usize], idx: &[usize], g: &Graph<T>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for &i in idx {
        if let Some(y) = g.labels[i] {
            n += 1;
            hit += (pred[i] == y as usize) as usize;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

/// Mean and population standard deviation of `n` runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }

    /// Summary of the `Some` entries of `values`.
    pub fn of_some(values: impl IntoIterator<Item = Option<f64>>) -> Option<Stat> {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        Stat::of(&v)
    }
}

/// Multi-seed evaluation summary, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub method: String,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trans: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ind: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prod: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mad: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mincut: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<crate::bench::LatencySummary>,
    pub runs: Vec<RunRecord>,
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Aggregates per-seed runs.
    pub fn from_runs(protocol: &str, method: &str, runs: Vec<RunRecord>, config: serde_json::Value) -> EvalReport {
        let col = |f: fn(&RunRecord) -> Option<f64>| Stat::of_some(runs.iter().map(f));
        EvalReport {
            protocol: protocol.to_string(),
            method: method.to_string(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            accuracy: col(|r| r.accuracy),
            trans: col(|r| r.trans),
            ind: col(|r| r.ind),
            prod: col(|r| r.prod),
            auc: col(|r| r.auc),
            mad: col(|r| r.mad),
            mincut: col(|r| r.mincut),
            latency: None,
            runs,
            config,
        }
    }
}
