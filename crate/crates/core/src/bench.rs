//! Inference latency: structure-free MLP encoding against GCN inference
//! that has to fetch each target's k-hop neighborhood first.

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use crate::graph::synthetic::make_synthetic;
use crate::graph::Graph;
use crate::model::{GcnBaseline, SimMlp};
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            reps: 30,
            warmup: 5,
            workers: 1,
        }
    }
}

impl BenchConfig {
    pub const MIN_REPS: usize = 30;
    pub const MIN_WARMUP: usize = 5;

    pub fn validate(&self) -> Result<()> {
        if self.reps < Self::MIN_REPS || self.warmup < Self::MIN_WARMUP || self.workers == 0 {
            return Err(Error::Config(format!(
                "benchmarks need >= {} reps, >= {} warmup runs and >= 1 worker, got {self:?}",
                Self::MIN_REPS,
                Self::MIN_WARMUP
            )));
        }
        Ok(())
    }
}

/// Quantiles of raw wall-clock samples in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
    pub samples_ms: Vec<f64>,
}

/// Linear interpolation between closest ranks.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Timing {
    pub fn from_samples(samples_ms: Vec<f64>) -> Result<Timing> {
        if samples_ms.is_empty() {
            return Err(Error::Config("no timing samples".into()));
        }
        let mut s = samples_ms.clone();
        s.sort_by(f64::total_cmp);
        Ok(Timing {
            median_ms: quantile(&s, 0.5),
            p10_ms: quantile(&s, 0.1),
            p90_ms: quantile(&s, 0.9),
            samples_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub precision: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_targets: usize,
    pub hops: usize,
    pub reps: usize,
    pub warmup: usize,
    pub workers: usize,
    pub mlp: Timing,
    pub gnn: Timing,
    /// `gnn.median_ms / mlp.median_ms`.
    pub speedup: f64,
}

/// The part of a latency report carried inside an evaluation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mlp_median_ms: f64,
    pub gnn_median_ms: f64,
    pub speedup: f64,
}

impl LatencyReport {
    pub fn summary(&self) -> LatencySummary {
        LatencySummary {
            mlp_median_ms: self.mlp.median_ms,
            gnn_median_ms: self.gnn.median_ms,
            speedup: self.speedup,
        }
    }

    /// Plain-text table: method, median and p10–p90 spread.
    pub fn table(&self) -> String {
        let row = |name: &str, t: &Timing| {
            format!("{name:<8} {:>12.3} {:>12.3} {:>12.3}\n", t.median_ms, t.p10_ms, t.p90_ms)
        };
        let mut s = format!("{:<8} {:>12} {:>12} {:>12}\n", "method", "median ms", "p10 ms", "p90 ms");
        s += &row("GCN", &self.gnn);
        s += &row("MLP", &self.mlp);
        s += &format!(
            "speedup {:.1}x  ({} targets, {} nodes, {} edges, k={}, {} worker(s), {})\n",
            self.speedup, self.n_targets, self.n_nodes, self.n_edges, self.hops, self.workers, self.precision
        );
        s
    }
}

/// Nodes within `k` hops of `targets` in breadth-first order, so nodes at
/// distance `≤ r` form a prefix of length `bounds[r]`.
fn ego_nodes<T: Scalar>(g: &Graph<T>, targets: &[usize], k: usize, local: &mut [u32]) -> (Vec<usize>, Vec<usize>) {
    let mut order = Vec::new();
    for &t in targets {
        if local[t] == u32::MAX {
            local[t] = order.len() as u32;
            order.push(t);
        }
    }
    let mut bounds = vec![order.len()];
    let mut start = 0;
    for _ in 0..k {
        let end = order.len();
        for a in start..end {
            for &j in g.neighbors(order[a]) {
                if local[j as usize] == u32::MAX {
                    local[j as usize] = order.len() as u32;
                    order.push(j as usize);
                }
            }
        }
        start = end;
        bounds.push(order.len());
    }
    (order, bounds)
}

/// GCN logits of `targets` computed from their k-hop ego-graph only,
/// normalized with full-graph degrees (so equal to the full-graph forward).
pub fn ego_gcn_forward<T: Scalar>(gcn: &GcnBaseline<T>, g: &Graph<T>, targets: &[usize]) -> Result<Tensor<T>> {
    if targets.iter().any(|&t| t >= g.n_nodes()) {
        return Err(Error::Config("target node out of range".into()));
    }
    let k = gcn.layers.len();
    let mut local = vec![u32::MAX; g.n_nodes()];
    let (order, bounds) = ego_nodes(g, targets, k, &mut local);
    let dt: Vec<f64> = order.iter().map(|&i| (g.degree(i) + 1) as f64).collect();
    let mut h = g.features.gather_rows(&order);
    for (l, layer) in gcn.layers.iter().enumerate() {
        let rows = bounds[k - 1 - l];
        let mut z = Tensor::zeros(rows, h.cols());
        for a in 0..rows {
            let i = order[a];
            let nb = g.neighbors(i);
            let split = nb.partition_point(|&j| (j as usize) < i);
            let row = nb[..split].iter().copied().chain(std::iter::once(i as u32)).chain(nb[split..].iter().copied());
            let dst = z.row_mut(a);
            for j in row {
                let b = local[j as usize] as usize;
                let w = T::of(1.0 / (dt[a] * dt[b]).sqrt());
                for (o, &v) in dst.iter_mut().zip(h.row(b)) {
                    *o += w * v;
                }
            }
        }
        let y = layer.forward(&z)?;
        h = if l + 1 < k { gcn.acts[l].forward(&y)? } else { y };
    }
    // first-occurrence order back to the caller's order
    Ok(h.gather_rows(&targets.iter().map(|&t| local[t] as usize).collect::<Vec<_>>()))
}

fn run_split<R: Send>(workers: usize, targets: &[usize], f: impl Fn(&[usize]) -> R + Sync) -> Vec<R> {
    if workers <= 1 {
        return vec![f(targets)];
    }
    let chunk = targets.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let hs: Vec<_> = targets.chunks(chunk).map(|c| s.spawn(|| f(c))).collect();
        hs.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    })
}

/// Times several workloads in round-robin order, rep by rep, so every
/// workload sees the same drift in machine state.
pub fn time_interleaved(cfg: &BenchConfig, work: &mut [&mut dyn FnMut() -> Result<()>]) -> Result<Vec<Timing>> {
    cfg.validate()?;
    for _ in 0..cfg.warmup {
        for f in work.iter_mut() {
            f()?;
        }
    }
    let mut samples = vec![Vec::with_capacity(cfg.reps); work.len()];
    for _ in 0..cfg.reps {
        for (f, s) in work.iter_mut().zip(&mut samples) {
            let t0 = Instant::now();
            f()?;
            s.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }
    samples.into_iter().map(Timing::from_samples).collect()
}

/// MLP encoding of `targets` from their own feature rows.
pub fn mlp_inference<T: Scalar>(mlp: &SimMlp<T>, g: &Graph<T>, targets: &[usize], workers: usize) -> Result<()> {
    for r in run_split(workers, targets, |c| mlp.encode_mlp(&g.features.gather_rows(c))) {
        std::hint::black_box(r?);
    }
    Ok(())
}

/// Ego-graph extraction plus GCN inference for `targets`.
pub fn gcn_inference<T: Scalar>(gcn: &GcnBaseline<T>, g: &Graph<T>, targets: &[usize], workers: usize) -> Result<()> {
    for r in run_split(workers, targets, |c| ego_gcn_forward(gcn, g, c)) {
        std::hint::black_box(r?);
    }
    Ok(())
}

/// Times MLP encoding of the targets' own features against ego-graph
/// extraction plus GCN propagation and transform for the same targets,
/// alternating the two rep by rep.
pub fn bench_inference<T: Scalar>(
    mlp: &SimMlp<T>,
    gcn: &GcnBaseline<T>,
    g: &Graph<T>,
    targets: &[usize],
    cfg: &BenchConfig,
) -> Result<LatencyReport> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::Config("benchmark needs at least one target node".into()));
    }
    if targets.iter().any(|&t| t >= g.n_nodes()) {
        return Err(Error::Config("target node out of range".into()));
    }
    let mut t = time_interleaved(
        cfg,
        &mut [
            &mut || mlp_inference(mlp, g, targets, cfg.workers),
            &mut || gcn_inference(gcn, g, targets, cfg.workers),
        ],
    )?;
    let (gnn_t, mlp_t) = (t.pop().expect("two timings"), t.pop().expect("two timings"));
    Ok(LatencyReport {
        precision: T::NAME.to_string(),
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        n_targets: targets.len(),
        hops: gcn.layers.len(),
        reps: cfg.reps,
        warmup: cfg.warmup,
        workers: cfg.workers,
        speedup: gnn_t.median_ms / mlp_t.median_ms,
        mlp: mlp_t,
        gnn: gnn_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize, Scheme};
    use crate::model::SimMlpDims;


    #[test]
    fn interleaved_calls_round_robin() {
        let cfg = BenchConfig::default();
        let order = std::cell::RefCell::new(Vec::new());
        let t = time_interleaved(
            &cfg,
            &mut [
                &mut || {
                    order.borrow_mut().push(0);
                    Ok(())
                },
                &mut || {
                    order.borrow_mut().push(1);
                    Ok(())
                },
            ],
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.samples_ms.len() == cfg.reps));
        let order = order.into_inner();
        assert_eq!(order.len(), 2 * (cfg.reps + cfg.warmup));
        assert!(order.chunks(2).all(|c| c == [0, 1]));
        assert!(time_interleaved(&BenchConfig { reps: 29, ..cfg }, &mut []).is_err());
    }
    #[test]
    fn ego_forward_matches_full_forward() {
        let g = make_synthetic::<f64>(300, 4.0, 6, 2);
        for layers in [vec![6, 5, 3], vec![6, 4], vec![6, 5, 5, 2]] {
            let gcn = GcnBaseline::new(&layers, 1).unwrap();
            let full = gcn.logits(&normalize(&g, Scheme::Bi), &g.features).unwrap();
            let targets = [7, 3, 250, 3, 99];
            let ego = ego_gcn_forward(&gcn, &g, &targets).unwrap();
            for (r, &t) in targets.iter().enumerate() {
                for (a, b) in ego.row(r).iter().zip(full.row(t)) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn ego_prefix_property() {
        let g = make_synthetic::<f64>(200, 3.0, 2, 5);
        let mut local = vec![u32::MAX; 200];
        let (order, bounds) = ego_nodes(&g, &[0, 1], 2, &mut local);
        assert_eq!(bounds.len(), 3);
        for (a, &i) in order[..bounds[1]].iter().enumerate() {
            for &j in g.neighbors(i) {
                assert!((local[j as usize] as usize) < bounds[2], "{a}");
            }
        }
    }

    #[test]
    fn quantiles_and_speedup_ratio() {
        let t = Timing::from_samples((1..=11).map(f64::from).collect()).unwrap();
        assert_eq!((t.median_ms, t.p10_ms, t.p90_ms), (6.0, 2.0, 10.0));
        let g = make_synthetic::<f32>(500, 5.0, 8, 1);
        let dims = SimMlpDims {
            in_dim: 8,
            hidden: 16,
            mlp_layers: 2,
            hops: 2,
            scheme: Scheme::Bi,
            shared_encoder: true,
        };
        let mlp = SimMlp::new(dims, 0).unwrap();
        let gcn = GcnBaseline::new(&[8, 16, 16], 0).unwrap();
        let targets: Vec<usize> = (0..50).collect();
        let rep = bench_inference(&mlp, &gcn, &g, &targets, &BenchConfig::default()).unwrap();
        assert_eq!(rep.speedup, rep.gnn.median_ms / rep.mlp.median_ms);
        assert_eq!(rep.mlp.samples_ms.len(), 30);
        assert_eq!(rep.workers, 1);
        assert!(rep.table().contains("speedup"));
        assert!(bench_inference(&mlp, &gcn, &g, &[], &BenchConfig::default()).is_err());
        let few = BenchConfig { reps: 10, ..BenchConfig::default() };
        assert!(bench_inference(&mlp, &gcn, &g, &targets, &few).is_err());
    }
}
