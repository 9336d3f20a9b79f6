use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::protocol::run_split;
use super::{EvalOptions, Method};
use crate::graph::{inject_edge_noise, inject_feature_noise, make_split, Graph, Protocol, SplitSpec, DEFAULT_PAIR_CAP};
use crate::rng::{stream_seed, Rng};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Feature noise level `α`.
    Feature,
    /// Edge flip probability.
    Edge,
    /// Fraction of train labels kept.
    Label,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature" => Ok(Axis::Feature),
            "edge" => Ok(Axis::Edge),
            "label" => Ok(Axis::Label),
            other => Err(Error::Config(format!("unknown sweep axis `{other}` (feature, edge, label)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub level: f64,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
    /// Inductive-arm accuracy per seed, in seed order.
    pub values: Vec<f64>,
}

/// Keeps `round(fraction·|train|)` labeled train nodes, never fewer than one
/// per class present. The per-class picks come first.
pub fn subsample_labels<T: Scalar>(g: &Graph<T>, train: &[usize], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("label fraction must lie in (0, 1], got {fraction}")));
    }
    let mut labeled: Vec<usize> = train.iter().copied().filter(|&i| g.labels[i].is_some()).collect();
    let mut classes: Vec<u32> = labeled.iter().filter_map(|&i| g.labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < g.n_classes {
        return Err(Error::Config(format!(
            "train set covers {} of {} classes; cannot keep one label per class",
            classes.len(),
            g.n_classes
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);
    let want = ((fraction * labeled.len() as f64).round() as usize).max(classes.len());
    let mut keep = Vec::with_capacity(want);
    let mut seen = vec![false; g.n_classes];
    for &i in &labeled {
        let y = g.labels[i].expect("filtered") as usize;
        if !seen[y] {
            seen[y] = true;
            keep.push(i);
        }
    }
    for &i in &labeled {
        if keep.len() >= want {
            break;
        }
        if !keep.contains(&i) {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    Ok(keep)
}

fn cell<T: Scalar>(method: &Method, g: &Graph<T>, axis: Axis, level: f64, seed: u64) -> Result<f64> {
    let mut split: SplitSpec = make_split(g, Protocol::Inductive, stream_seed(seed, "split"))?;
    let noisy;
    let graph = match axis {
        Axis::Feature => {
            noisy = inject_feature_noise(g, level, stream_seed(seed, "noise"))?;
            &noisy
        }
        Axis::Edge => {
            noisy = inject_edge_noise(g, level, stream_seed(seed, "noise"), DEFAULT_PAIR_CAP)?;
            &noisy
        }
        Axis::Label => {
            split.train = subsample_labels(g, &split.train, level, stream_seed(seed, "labels"))?;
            g
        }
    };
    let opts = EvalOptions {
        metrics: false,
        ..EvalOptions::default()
    };
    let r = run_split(&method.with_seed(seed), graph, &split, &opts)?;
    r.ind.ok_or_else(|| Error::Eval("inductive run produced no inductive arm".into()))
}

/// Inductive-arm accuracy of `method` for every `(level, seed)` cell.
///
/// Cells run on up to `threads` workers; results are placed by cell index
/// so the curve does not depend on scheduling.
pub fn robustness_sweep<T: Scalar>(
    method: &Method,
    g: &Graph<T>,
    axis: Axis,
    levels: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<CurvePoint>> {
    if seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed".into()));
    }
    if levels.is_empty() {
        return Err(Error::Config("a sweep needs at least one level".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("sweep levels must be strictly ascending, got {levels:?}")));
    }
    let cells: Vec<(f64, u64)> = levels.iter().flat_map(|&l| seeds.iter().map(move |&s| (l, s))).collect();
    let workers = threads.clamp(1, cells.len());
    let mut results: Vec<Option<Result<f64>>> = (0..cells.len()).map(|_| None).collect();
    if workers == 1 {
        for (k, &(l, s)) in cells.iter().enumerate() {
            results[k] = Some(cell(method, g, axis, l, s));
        }
    } else {
        let done: Vec<Vec<(usize, Result<f64>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let cells = &cells;
                    scope.spawn(move || {
                        (w..cells.len())
                            .step_by(workers)
                            .map(|k| (k, cell(method, g, axis, cells[k].0, cells[k].1)))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for (k, r) in done.into_iter().flatten() {
            results[k] = Some(r);
        }
    }
    let values = results
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect::<Result<Vec<f64>>>()?;
    Ok(levels
        .iter()
        .zip(values.chunks(seeds.len()))
        .map(|(&level, v)| {
            let s = super::Stat::of(v).expect("non-empty");
            CurvePoint {
                level,
                mean: s.mean,
                std: s.std,
                n_seeds: s.n,
                values: v.to_vec(),
            }
        })
        .collect())
}

/// `level,mean,std,n_seeds` with a header row.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("level,mean,std,n_seeds\n");
    for p in curve {
        let _ = writeln!(s, "{},{},{},{}", p.level, p.mean, p.std, p.n_seeds);
    }
    s
}
