//! On-disk dataset layout.
//!
//! ```text
//! meta.json     {"n_nodes", "n_features", "n_classes", "directed_edge_count"}
//! edges.bin     little-endian u32 (src, dst) per directed edge
//! features.bin  little-endian f32, row-major n_nodes × n_features
//! labels.bin    little-endian u32 per node, 0xFFFFFFFF = unlabeled
//! splits.json   optional, see [`SplitsFile`]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, Protocol, SplitSpec, UNLABELED};
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub n_nodes: u64,
    pub n_features: u64,
    pub n_classes: u64,
    pub directed_edge_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitsFile {
    pub protocol: String,
    pub seed: u64,
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
    #[serde(default)]
    pub inductive: Vec<u64>,
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p = dir.join(name);
    fs::read(&p).map_err(|e| Error::dataset(&p, e.to_string()))
}

fn u32s(bytes: &[u8]) -> impl Iterator<Item = u32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
}

pub fn load_dataset<T: Scalar>(dir: impl AsRef<Path>) -> Result<Graph<T>> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_slice(&read(dir, "meta.json")?)
        .map_err(|e| Error::dataset(&meta_path, e.to_string()))?;
    let n = meta.n_nodes as usize;
    let d = meta.n_features as usize;

    let edges_raw = read(dir, "edges.bin")?;
    if edges_raw.len() as u64 != meta.directed_edge_count * 8 {
        return Err(Error::dataset(
            dir.join("edges.bin"),
            format!(
                "{} bytes but meta declares {} directed edges",
                edges_raw.len(),
                meta.directed_edge_count
            ),
        ));
    }
    let ids: Vec<u32> = u32s(&edges_raw).collect();
    let edges: Vec<(u32, u32)> = ids.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    if let Some(&(s, t)) = edges.iter().find(|&&(s, t)| s as usize >= n || t as usize >= n) {
        return Err(Error::dataset(
            dir.join("edges.bin"),
            format!("edge ({s}, {t}) references a node >= {n}"),
        ));
    }

    let feat_raw = read(dir, "features.bin")?;
    if feat_raw.len() != n * d * 4 {
        return Err(Error::dataset(
            dir.join("features.bin"),
            format!("{} bytes, expected {}", feat_raw.len(), n * d * 4),
        ));
    }
    let feats: Vec<T> = feat_raw
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    let features = Tensor::new(n, d, feats).map_err(|e| Error::dataset(dir.join("features.bin"), e.to_string()))?;

    let labels_path = dir.join("labels.bin");
    let labels = if labels_path.exists() {
        let raw = read(dir, "labels.bin")?;
        if raw.len() != n * 4 {
            return Err(Error::dataset(
                &labels_path,
                format!("{} bytes, expected {}", raw.len(), n * 4),
            ));
        }
        let mut out = Vec::with_capacity(n);
        for (i, l) in u32s(&raw).enumerate() {
            if l == UNLABELED {
                out.push(None);
            } else if (l as u64) < meta.n_classes {
                out.push(Some(l));
            } else {
                return Err(Error::dataset(
                    &labels_path,
                    format!("node {i} has label {l} but n_classes is {}", meta.n_classes),
                ));
            }
        }
        out
    } else {
        vec![None; n]
    };

    Graph::from_edges(n, &edges, features, labels, meta.n_classes as usize)
        .map_err(|e| Error::dataset(dir, e.to_string()))
}

/// Writes the canonical layout: edges in CSR order, both directions.
pub fn save_dataset<T: Scalar>(g: &Graph<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        n_nodes: g.n_nodes() as u64,
        n_features: g.n_features() as u64,
        n_classes: g.n_classes as u64,
        directed_edge_count: g.n_directed_edges() as u64,
    };
    fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;

    let mut edges = Vec::with_capacity(g.n_directed_edges() * 8);
    for (s, t) in g.directed_edges() {
        edges.extend_from_slice(&s.to_le_bytes());
        edges.extend_from_slice(&t.to_le_bytes());
    }
    fs::write(dir.join("edges.bin"), edges)?;

    let mut feats = Vec::with_capacity(g.features.len() * 4);
    for v in g.features.as_slice() {
        feats.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(dir.join("features.bin"), feats)?;

    let mut labels = Vec::with_capacity(g.n_nodes() * 4);
    for l in &g.labels {
        labels.extend_from_slice(&l.unwrap_or(UNLABELED).to_le_bytes());
    }
    fs::write(dir.join("labels.bin"), labels)?;
    Ok(())
}

pub fn save_splits(split: &SplitSpec, path: impl AsRef<Path>) -> Result<()> {
    let to64 = |v: &[usize]| v.iter().map(|&x| x as u64).collect::<Vec<_>>();
    let file = SplitsFile {
        protocol: split.protocol.as_str().to_string(),
        seed: split.seed,
        train: to64(&split.train),
        val: to64(&split.val),
        test: to64(&split.test),
        inductive: to64(&split.inductive),
    };
    fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub fn load_splits(path: impl AsRef<Path>, n_nodes: usize) -> Result<SplitSpec> {
    let path = path.as_ref();
    let file: SplitsFile = serde_json::from_slice(&fs::read(path)?)?;
    let protocol: Protocol = file.protocol.parse()?;
    let conv = |v: &[u64]| -> Result<Vec<usize>> {
        v.iter()
            .map(|&x| {
                if (x as usize) < n_nodes {
                    Ok(x as usize)
                } else {
                    Err(Error::dataset(path, format!("split index {x} >= {n_nodes}")))
                }
            })
            .collect()
    };
    let spec = SplitSpec {
        protocol,
        seed: file.seed,
        train: conv(&file.train)?,
        val: conv(&file.val)?,
        test: conv(&file.test)?,
        inductive: conv(&file.inductive)?,
    };
    spec.validate(n_nodes)?;
    Ok(spec)
}
