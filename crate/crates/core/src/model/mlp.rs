use rand::Rng;

use crate::numeric::{join, BatchNorm, BatchNormCache, LinearLayer, Mode, Module, PRelu, ParamMut};
use crate::{Error, Result, Scalar, Tensor};

/// Stack of linear layers; every hidden layer is followed by an optional
/// batchnorm and a PReLU, the last layer is purely linear.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    pub linears: Vec<LinearLayer<T>>,
    pub norms: Vec<BatchNorm<T>>,
    pub acts: Vec<PRelu<T>>,
}

/// Intermediate values of one [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    inputs: Vec<Tensor<T>>,
    bn: Vec<BatchNormCache<T>>,
    pre_act: Vec<Tensor<T>>,
    /// Output of the last hidden activation (the input of the last layer).
    penultimate: Option<usize>,
}

impl<T: Scalar> Mlp<T> {
    /// `dims = [in, hidden.., out]`.
    pub fn new<R: Rng>(dims: &[usize], batchnorm: bool, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid MLP dims {dims:?}")));
        }
        let linears: Vec<_> = dims.windows(2).map(|w| LinearLayer::glorot(w[0], w[1], rng)).collect();
        let hidden = &dims[1..dims.len() - 1];
        Ok(Mlp {
            norms: if batchnorm {
                hidden.iter().map(|&h| BatchNorm::new(h)).collect()
            } else {
                Vec::new()
            },
            acts: hidden.iter().map(|_| PRelu::default()).collect(),
            linears,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.linears[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.linears.last().expect("non-empty").out_dim()
    }

    pub fn depth(&self) -> usize {
        self.linears.len()
    }

    pub fn has_batchnorm(&self) -> bool {
        !self.norms.is_empty()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "mlp_forward",
                left: x.shape(),
                right: self.linears[0].weight.shape(),
            });
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, MlpCache<T>)> {
        self.check_input(x)?;
        let last = self.linears.len() - 1;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(last + 1),
            bn: Vec::new(),
            pre_act: Vec::new(),
            penultimate: None,
        };
        let mut h = x.clone();
        for l in 0..=last {
            let mut y = self.linears[l].forward(&h)?;
            cache.inputs.push(h);
            if l < last {
                if let Some(bn) = self.norms.get_mut(l) {
                    let (z, c) = bn.forward(&y, mode)?;
                    cache.bn.push(c);
                    y = z;
                }
                h = self.acts[l].forward(&y)?;
                cache.pre_act.push(y);
            } else {
                h = y;
            }
        }
        if last > 0 {
            cache.penultimate = Some(last);
        }
        Ok((h, cache))
    }

    /// Accumulates parameter gradients. Returns `dL/dx` when `input_grad`.
    pub fn backward(&mut self, cache: &MlpCache<T>, dy: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        if cache.inputs.len() != self.linears.len() {
            return Err(Error::State("MLP cache does not match the layer count".into()));
        }
        let mut g = dy.clone();
        for l in (0..self.linears.len()).rev() {
            if l + 1 < self.linears.len() {
                g = self.acts[l].backward(&cache.pre_act[l], &g)?;
                if let Some(bn) = self.norms.get_mut(l) {
                    g = bn.backward(&cache.bn[l], &g)?;
                }
            }
            if l == 0 && !input_grad {
                self.linears[0].backward_params(&cache.inputs[0], &g)?;
                return Ok(None);
            }
            g = self.linears[l].backward(&cache.inputs[l], &g)?;
        }
        Ok(Some(g))
    }

    /// Eval-mode forward without touching any state.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (out, _) = self.infer_with_hidden(x)?;
        Ok(out)
    }

    /// Eval-mode output together with the input of the last layer.
    pub fn infer_with_hidden(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        self.check_input(x)?;
        let last = self.linears.len() - 1;
        let mut h = x.clone();
        for l in 0..last {
            let mut y = self.linears[l].forward(&h)?;
            if let Some(bn) = self.norms.get(l) {
                y = batchnorm_eval(bn, &y);
            }
            h = self.acts[l].forward(&y)?;
        }
        let out = self.linears[last].forward(&h)?;
        Ok((out, h))
    }
}

impl<T: Scalar> MlpCache<T> {
    /// Representation fed to the last linear layer (`None` for one-layer MLPs).
    pub fn penultimate(&self) -> Option<&Tensor<T>> {
        self.penultimate.map(|l| &self.inputs[l])
    }
}

fn batchnorm_eval<T: Scalar>(bn: &BatchNorm<T>, y: &Tensor<T>) -> Tensor<T> {
    let eps = T::of(bn.eps);
    let (n, d) = y.shape();
    let k: Vec<T> = (0..d)
        .map(|j| bn.scale.get(0, j) / (bn.running_var.get(0, j) + eps).sqrt())
        .collect();
    let mut out = y.clone();
    for i in 0..n {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - bn.running_mean.get(0, j)) * k[j] + bn.shift.get(0, j);
        }
    }
    out
}

impl<T: Scalar> Module<T> for Mlp<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        for (l, lin) in self.linears.iter_mut().enumerate() {
            lin.params_mut(&join(prefix, &format!("linear{l}")), out);
        }
        for (l, bn) in self.norms.iter_mut().enumerate() {
            bn.params_mut(&join(prefix, &format!("bn{l}")), out);
        }
        for (l, a) in self.acts.iter_mut().enumerate() {
            a.params_mut(&join(prefix, &format!("act{l}")), out);
        }
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        for (l, lin) in self.linears.iter_mut().enumerate() {
            lin.state_mut(&join(prefix, &format!("linear{l}")), out);
        }
        for (l, bn) in self.norms.iter_mut().enumerate() {
            bn.state_mut(&join(prefix, &format!("bn{l}")), out);
        }
        for (l, a) in self.acts.iter_mut().enumerate() {
            a.state_mut(&join(prefix, &format!("act{l}")), out);
        }
    }
}
