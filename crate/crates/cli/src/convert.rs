//! Text edge lists, feature tables and label tables to the binary dataset layout.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use simmlp::graph::{save_dataset, Graph};
use simmlp::Tensor;

/// Tab if the first line has one, else comma, else a single space.
fn sniff(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else if first.contains(',') {
        b','
    } else {
        b' '
    }
}

/// Non-empty records with their 1-based line numbers.
fn records(path: &Path, header: bool) -> Result<Vec<(u64, Vec<String>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(sniff(&text))
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("malformed row in {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = rec.iter().filter(|f| !f.is_empty()).map(str::to_string).collect();
        if !fields.is_empty() {
            out.push((line, fields));
        }
    }
    Ok(out)
}

fn node_id(s: &str, path: &Path, line: u64) -> Result<u32> {
    s.parse::<u32>()
        .with_context(|| format!("{}:{line}: node id `{s}` is not a non-negative integer", path.display()))
}

/// Output of a conversion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Converted {
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_edges: usize,
    /// Class names in id order when labels were not integers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

/// Reads `edges` (two integer columns), `features` (`id, x_1 … x_d`) and
/// optional `labels` (`id, label`), and writes the dataset to `out`.
///
/// Node ids are the feature-table ids and must be exactly `0..n`.
pub fn convert(edges: &Path, features: &Path, labels: Option<&Path>, out: &Path, header: bool) -> Result<Converted> {
    let rows = records(features, header)?;
    if rows.is_empty() {
        bail!("{} has no rows", features.display());
    }
    let width = rows[0].1.len();
    if width < 2 {
        bail!("{}: rows need a node id followed by at least one feature", features.display());
    }
    let n = rows.len();
    let mut data = vec![0f64; n * (width - 1)];
    let mut seen = vec![false; n];
    let mut out_of_range = BTreeSet::new();
    for (line, f) in &rows {
        if f.len() != width {
            bail!(
                "{}:{line}: ragged row with {} fields, expected {width} like the first row",
                features.display(),
                f.len()
            );
        }
        let id = node_id(&f[0], features, *line)? as usize;
        if id >= n {
            out_of_range.insert(id);
            continue;
        }
        if seen[id] {
            bail!("{}:{line}: node {id} appears twice", features.display());
        }
        seen[id] = true;
        for (k, v) in f[1..].iter().enumerate() {
            data[id * (width - 1) + k] = v
                .parse()
                .with_context(|| format!("{}:{line}: feature `{v}` is not a number", features.display()))?;
        }
    }
    if !out_of_range.is_empty() {
        let missing: Vec<usize> = (0..n).filter(|&i| !seen[i]).take(5).collect();
        let extra: Vec<usize> = out_of_range.into_iter().take(5).collect();
        bail!(
            "node ids must be contiguous 0..{n} but ids {extra:?} are out of range and {missing:?} are missing; \
             remap ids to 0..{n} (e.g. by order of appearance in {}) and rewrite the edge list accordingly",
            features.display()
        );
    }

    let mut pairs = Vec::new();
    for (line, f) in records(edges, header)? {
        if f.len() != 2 {
            bail!("{}:{line}: expected 2 columns (src, dst), found {}", edges.display(), f.len());
        }
        let (s, t) = (node_id(&f[0], edges, line)?, node_id(&f[1], edges, line)?);
        if s as usize >= n || t as usize >= n {
            bail!(
                "{}:{line}: edge ({s}, {t}) references a node outside 0..{n} listed in {}",
                edges.display(),
                features.display()
            );
        }
        pairs.push((s, t));
    }

    let mut node_labels = vec![None; n];
    let mut classes = None;
    let mut n_classes = 0;
    if let Some(lp) = labels {
        let rows = records(lp, header)?;
        let mut raw = vec![None; n];
        for (line, f) in &rows {
            if f.len() != 2 {
                bail!("{}:{line}: expected 2 columns (id, label), found {}", lp.display(), f.len());
            }
            let id = node_id(&f[0], lp, *line)? as usize;
            if id >= n {
                bail!("{}:{line}: node {id} is not in 0..{n}", lp.display());
            }
            raw[id] = Some(f[1].clone());
        }
        let ints: Option<Vec<Option<u32>>> =
            raw.iter().map(|r| r.as_ref().map_or(Some(None), |s| s.parse().ok().map(Some))).collect();
        match ints {
            Some(v) => {
                n_classes = v.iter().flatten().max().map_or(0, |&m| m as usize + 1);
                node_labels = v;
            }
            None => {
                let names: Vec<String> = raw.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                node_labels = raw
                    .iter()
                    .map(|r| r.as_ref().map(|s| names.binary_search(s).expect("collected above") as u32))
                    .collect();
                n_classes = names.len();
                classes = Some(names);
            }
        }
    }

    let x = Tensor::<f64>::new(n, width - 1, data)?;
    let g = Graph::from_edges(n, &pairs, x, node_labels, n_classes)?;
    save_dataset(&g, out).with_context(|| format!("cannot write dataset to {}", out.display()))?;
    Ok(Converted {
        n_nodes: n,
        n_features: width - 1,
        n_classes,
        n_edges: g.n_edges(),
        classes,
    })
}
