use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache};
use crate::graph::{propagate, NormalizedAdjacency, Scheme};
use crate::numeric::{join, Mode, Module, PRelu, ParamMut};
use crate::rng::Rng;
use crate::{Error, Result, Scalar, Tensor};

/// Architecture of a [`SimMlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMlpDims {
    pub in_dim: usize,
    pub hidden: usize,
    pub mlp_layers: usize,
    /// Propagation hops of the GNN approximation.
    pub hops: usize,
    pub scheme: Scheme,
    /// When false the GNN branch gets its own encoder parameters.
    pub shared_encoder: bool,
}

impl SimMlpDims {
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim];
        d.extend(std::iter::repeat_n(self.hidden, self.mlp_layers));
        d
    }

    fn validate(&self) -> Result<()> {
        if self.mlp_layers == 0 || self.hops == 0 || self.hidden == 0 || self.in_dim == 0 {
            return Err(Error::Config(format!("invalid SimMLP dims {self:?}")));
        }
        Ok(())
    }
}

/// MLP encoder, GNN approximation, projector and feature decoder.
#[derive(Debug, Clone)]
pub struct SimMlp<T> {
    pub dims: SimMlpDims,
    pub encoder: Mlp<T>,
    /// Present only when the encoder is not shared.
    pub gnn_encoder: Option<Mlp<T>>,
    pub gnn_act: PRelu<T>,
    pub projector: Mlp<T>,
    pub decoder: Mlp<T>,
    pending: Option<Pending<T>>,
}

/// Outputs of a training forward pass.
#[derive(Debug, Clone)]
pub struct SimMlpOutputs<T> {
    pub h_mlp: Tensor<T>,
    /// `ρ(H^MLP)`
    pub projected: Tensor<T>,
    pub h_gnn: Tensor<T>,
    /// `D(H^GNN)`
    pub recon: Tensor<T>,
}

#[derive(Debug, Clone)]
struct Pending<T> {
    enc: MlpCache<T>,
    /// Encoder cache of the GNN branch when it did not reuse `enc`.
    gnn_enc: Option<MlpCache<T>>,
    proj: MlpCache<T>,
    dec: MlpCache<T>,
    propagated: Tensor<T>,
    adj_t: NormalizedAdjacency<T>,
}

impl<T: Scalar> SimMlp<T> {
    pub fn new(dims: SimMlpDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = Rng::seed_from_u64(seed);
        let h = dims.hidden;
        let encoder = Mlp::new(&dims.encoder_dims(), true, &mut rng)?;
        let gnn_encoder = if dims.shared_encoder {
            None
        } else {
            Some(Mlp::new(&dims.encoder_dims(), true, &mut rng)?)
        };
        Ok(SimMlp {
            dims,
            encoder,
            gnn_encoder,
            gnn_act: PRelu::default(),
            projector: Mlp::new(&[h, h, h], false, &mut rng)?,
            decoder: Mlp::new(&[h, h, dims.in_dim], false, &mut rng)?,
            pending: None,
        })
    }

    /// `H^MLP = E(X)`, eval mode. Row `i` depends on row `i` of `x` only.
    pub fn encode_mlp(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.encoder.infer(x)
    }

    /// `H^GNN = σ(Â^k E(X))`, eval mode.
    pub fn encode_gnn_approx(&self, adj: &NormalizedAdjacency<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let enc = self.gnn_encoder.as_ref().unwrap_or(&self.encoder);
        let h = enc.infer(x)?;
        self.gnn_act.forward(&propagate(adj, &h, self.dims.hops)?)
    }

    /// Train-mode forward of both branches. `gnn_x` is the GNN-branch input
    /// when it differs from `x` (a second augmented view); `adj` is the
    /// adjacency the GNN branch propagates over.
    pub fn forward_train(
        &mut self,
        x: &Tensor<T>,
        gnn_x: Option<&Tensor<T>>,
        adj: &NormalizedAdjacency<T>,
    ) -> Result<SimMlpOutputs<T>> {
        self.pending = None;
        let (h_mlp, enc) = self.encoder.forward(x, Mode::Train)?;
        let (h_src, gnn_enc) = match (&mut self.gnn_encoder, gnn_x) {
            (Some(g), gx) => {
                let (h, c) = g.forward(gx.unwrap_or(x), Mode::Train)?;
                (h, Some(c))
            }
            (None, Some(gx)) => {
                let (h, c) = self.encoder.forward(gx, Mode::Train)?;
                (h, Some(c))
            }
            (None, None) => (h_mlp.clone(), None),
        };
        let propagated = propagate(adj, &h_src, self.dims.hops)?;
        let h_gnn = self.gnn_act.forward(&propagated)?;
        let (projected, proj) = self.projector.forward(&h_mlp, Mode::Train)?;
        let (recon, dec) = self.decoder.forward(&h_gnn, Mode::Train)?;
        self.pending = Some(Pending {
            enc,
            gnn_enc,
            proj,
            dec,
            propagated,
            adj_t: adj.transpose(),
        });
        Ok(SimMlpOutputs {
            h_mlp,
            projected,
            h_gnn,
            recon,
        })
    }

    /// Back-propagates loss gradients with respect to the three outputs of
    /// the last [`forward_train`](Self::forward_train), accumulating into the
    /// parameter gradients. Consumes the stored forward state.
    pub fn backward(&mut self, d_projected: &Tensor<T>, d_h_gnn: &Tensor<T>, d_recon: &Tensor<T>) -> Result<()> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut d_hg = self.decoder.backward(&p.dec, d_recon, true)?.expect("input grad");
        d_hg.add_assign(d_h_gnn)?;
        let d_prop = self.gnn_act.backward(&p.propagated, &d_hg)?;
        let d_src = propagate(&p.adj_t, &d_prop, self.dims.hops)?;
        let mut d_mlp = self.projector.backward(&p.proj, d_projected, true)?.expect("input grad");
        match (&mut self.gnn_encoder, &p.gnn_enc) {
            (Some(g), Some(c)) => {
                g.backward(c, &d_src, false)?;
            }
            (None, Some(c)) => {
                self.encoder.backward(c, &d_src, false)?;
            }
            (None, None) => d_mlp.add_assign(&d_src)?,
            (Some(_), None) => unreachable!("separate encoder always caches"),
        }
        self.encoder.backward(&p.enc, &d_mlp, false)?;
        Ok(())
    }

    pub fn has_pending_forward(&self) -> bool {
        self.pending.is_some()
    }
}

impl<T: Scalar> Module<T> for SimMlp<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        self.encoder.params_mut(&join(prefix, "encoder"), out);
        if let Some(g) = &mut self.gnn_encoder {
            g.params_mut(&join(prefix, "gnn_encoder"), out);
        }
        self.gnn_act.params_mut(&join(prefix, "gnn_act"), out);
        self.projector.params_mut(&join(prefix, "projector"), out);
        self.decoder.params_mut(&join(prefix, "decoder"), out);
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        self.encoder.state_mut(&join(prefix, "encoder"), out);
        if let Some(g) = &mut self.gnn_encoder {
            g.state_mut(&join(prefix, "gnn_encoder"), out);
        }
        self.gnn_act.state_mut(&join(prefix, "gnn_act"), out);
        self.projector.state_mut(&join(prefix, "projector"), out);
        self.decoder.state_mut(&join(prefix, "decoder"), out);
    }
}
