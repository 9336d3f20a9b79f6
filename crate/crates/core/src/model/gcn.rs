use rand::SeedableRng;

use crate::graph::{propagate, NormalizedAdjacency};
use crate::numeric::{join, LinearLayer, Module, PRelu, ParamMut};
use crate::rng::Rng;
use crate::{Error, Result, Scalar, Tensor};

/// Message-passing GCN: each layer propagates, transforms, then applies a
/// PReLU (except the output layer, which yields logits).
#[derive(Debug, Clone)]
pub struct GcnBaseline<T> {
    pub layers: Vec<LinearLayer<T>>,
    pub acts: Vec<PRelu<T>>,
}

#[derive(Debug, Clone)]
pub struct GcnCache<T> {
    propagated: Vec<Tensor<T>>,
    pre_act: Vec<Tensor<T>>,
}

impl<T: Scalar> GcnBaseline<T> {
    /// `dims = [in, hidden.., n_classes]`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid GCN dims {dims:?}")));
        }
        let mut rng = Rng::seed_from_u64(seed);
        Ok(GcnBaseline {
            layers: dims.windows(2).map(|w| LinearLayer::glorot(w[0], w[1], &mut rng)).collect(),
            acts: (2..dims.len()).map(|_| PRelu::default()).collect(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].in_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim()));
        d
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    /// Logits and the representation entering the last layer.
    pub fn forward(&self, adj: &NormalizedAdjacency<T>, x: &Tensor<T>) -> Result<(Tensor<T>, GcnCache<T>)> {
        if x.cols() != self.layers[0].in_dim() {
            return Err(Error::Shape {
                op: "gcn_forward",
                left: x.shape(),
                right: self.layers[0].weight.shape(),
            });
        }
        let mut cache = GcnCache {
            propagated: Vec::new(),
            pre_act: Vec::new(),
        };
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = propagate(adj, &h, 1)?;
            let y = layer.forward(&z)?;
            cache.propagated.push(z);
            if l < last {
                h = self.acts[l].forward(&y)?;
                cache.pre_act.push(y);
            } else {
                h = y;
            }
        }
        Ok((h, cache))
    }

    pub fn logits(&self, adj: &NormalizedAdjacency<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(adj, x)?.0)
    }

    /// Output of the last hidden layer (the node embedding).
    pub fn embed(&self, adj: &NormalizedAdjacency<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, cache) = self.forward(adj, x)?;
        let last = self.layers.len() - 1;
        if last == 0 {
            return Ok(cache.propagated[0].clone());
        }
        self.acts[last - 1].forward(&cache.pre_act[last - 1])
    }

    /// `adj_t` is the transpose of the adjacency used in the forward pass.
    pub fn backward(&mut self, adj_t: &NormalizedAdjacency<T>, cache: &GcnCache<T>, dy: &Tensor<T>) -> Result<()> {
        let mut g = dy.clone();
        for l in (0..self.layers.len()).rev() {
            if l + 1 < self.layers.len() {
                g = self.acts[l].backward(&cache.pre_act[l], &g)?;
            }
            if l == 0 {
                self.layers[0].backward_params(&cache.propagated[0], &g)?;
            } else {
                let dz = self.layers[l].backward(&cache.propagated[l], &g)?;
                g = propagate(adj_t, &dz, 1)?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Module<T> for GcnBaseline<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        for (l, lin) in self.layers.iter_mut().enumerate() {
            lin.params_mut(&join(prefix, &format!("linear{l}")), out);
        }
        for (l, a) in self.acts.iter_mut().enumerate() {
            a.params_mut(&join(prefix, &format!("act{l}")), out);
        }
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        for (l, lin) in self.layers.iter_mut().enumerate() {
            lin.state_mut(&join(prefix, &format!("linear{l}")), out);
        }
        for (l, a) in self.acts.iter_mut().enumerate() {
            a.state_mut(&join(prefix, &format!("act{l}")), out);
        }
    }
}
