use serde::{Deserialize, Serialize};

use super::Graph;
use crate::{Error, Result, Scalar, Tensor};

/// Normalization of `Ã = A + I` used for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `D̃^-1/2 Ã D̃^-1/2`
    #[default]
    Bi,
    /// Rows sum to one: `α_ij = 1/d̃_i`.
    Row,
    /// Columns sum to one: `α_ij = 1/d̃_j`.
    Col,
}

impl Scheme {
    pub fn transposed(self) -> Self {
        match self {
            Scheme::Bi => Scheme::Bi,
            Scheme::Row => Scheme::Col,
            Scheme::Col => Scheme::Row,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bi" => Ok(Scheme::Bi),
            "row" => Ok(Scheme::Row),
            "col" => Ok(Scheme::Col),
            other => Err(Error::Config(format!("unknown normalization scheme `{other}`"))),
        }
    }
}

/// Weighted CSR over `Ã = A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<T>,
    scheme: Scheme,
}

pub fn normalize<T: Scalar>(g: &Graph<T>, scheme: Scheme) -> NormalizedAdjacency<T> {
    let n = g.n_nodes();
    let dt: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(g.n_directed_edges() + n);
    let mut weights = Vec::with_capacity(g.n_directed_edges() + n);
    offsets.push(0);
    for i in 0..n {
        let nb = g.neighbors(i);
        let split = nb.partition_point(|&j| (j as usize) < i);
        let row = nb[..split]
            .iter()
            .copied()
            .chain(std::iter::once(i as u32))
            .chain(nb[split..].iter().copied());
        for j in row {
            let w = match scheme {
                Scheme::Bi => 1.0 / (dt[i] * dt[j as usize]).sqrt(),
                Scheme::Row => 1.0 / dt[i],
                Scheme::Col => 1.0 / dt[j as usize],
            };
            targets.push(j);
            weights.push(T::of(w));
        }
        offsets.push(targets.len());
    }
    NormalizedAdjacency {
        offsets,
        targets,
        weights,
        scheme,
    }
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    /// `(column, weight)` entries of row `i`, column-sorted, self-loop included.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// `Âᵀ`. The sparsity pattern is symmetric, so only the weights change.
    pub fn transpose(&self) -> Self {
        let mut weights = Vec::with_capacity(self.weights.len());
        for i in 0..self.n_nodes() {
            for (j, _) in self.row(i) {
                weights.push(self.weight(j, i).expect("symmetric pattern"));
            }
        }
        NormalizedAdjacency {
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            weights,
            scheme: self.scheme.transposed(),
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<T> {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| self.weights[r.start + k])
    }

    /// One sparse product `Â · h`.
    pub fn apply(&self, h: &Tensor<T>) -> Result<Tensor<T>> {
        if h.rows() != self.n_nodes() {
            return Err(Error::Shape {
                op: "propagate",
                left: (self.n_nodes(), self.n_nodes()),
                right: h.shape(),
            });
        }
        let d = h.cols();
        let mut out = Tensor::zeros(h.rows(), d);
        for i in 0..self.n_nodes() {
            let dst = out.row_mut(i);
            for (j, w) in self.row(i) {
                for (o, &v) in dst.iter_mut().zip(h.row(j)) {
                    *o += w * v;
                }
            }
        }
        out.ensure_finite("propagate")?;
        Ok(out)
    }
}

/// `Â^k · h` by `k` successive sparse products.
pub fn propagate<T: Scalar>(adj: &NormalizedAdjacency<T>, h: &Tensor<T>, k_layers: usize) -> Result<Tensor<T>> {
    if k_layers == 0 {
        return Err(Error::Config("propagation needs at least one hop".into()));
    }
    let mut cur = adj.apply(h)?;
    for _ in 1..k_layers {
        cur = adj.apply(&cur)?;
    }
    Ok(cur)
}
