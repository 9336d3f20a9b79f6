//! Self-supervised SimMLP training.

mod config;
mod loss;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use config::TrainConfig;
pub use loss::{decomposition_identity_check, simmlp_loss, LossValue, SimMlpLoss};

use crate::graph::{augment, normalize, Graph, NormalizedAdjacency};
use crate::model::{SimMlp, SimMlpOutputs};
use crate::numeric::{AdamW, Module};
use crate::rng::stream_seed;
use crate::{Error, Result, Scalar, Tensor};

/// One epoch of training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub inv_term: f64,
    pub rec_term: f64,
    /// Mean per-dimension standard deviation of `H^MLP`.
    pub emb_std: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe_acc: Option<f64>,
}

/// Append-only per-epoch log used to spot representation collapse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollapseMonitor {
    records: Vec<EpochRecord>,
}

impl CollapseMonitor {
    pub fn push(&mut self, r: EpochRecord) -> Result<()> {
        let expected = self.records.len() + 1;
        if r.epoch != expected {
            return Err(Error::State(format!("monitor expected epoch {expected}, got {}", r.epoch)));
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// JSON lines, one object per epoch.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained<T> {
    pub model: SimMlp<T>,
    pub monitor: CollapseMonitor,
}

/// Loss and gradients of one training step on explicit inputs, leaving the
/// gradients accumulated in `model` (after zeroing them).
pub fn loss_and_backward<T: Scalar>(
    model: &mut SimMlp<T>,
    x_mlp: &Tensor<T>,
    x_gnn: Option<&Tensor<T>>,
    adj: &NormalizedAdjacency<T>,
    target: &Tensor<T>,
    cfg: &TrainConfig,
) -> Result<(LossValue<T>, SimMlpOutputs<T>)> {
    let out = model.forward_train(x_mlp, x_gnn, adj)?;
    let lambda = if cfg.use_reconstruction { cfg.lambda } else { 0.0 };
    let loss_cfg = SimMlpLoss::new(cfg.gamma, lambda)?;
    let v = simmlp_loss(&out.projected, &out.h_gnn, &out.recon, target, &loss_cfg)?;
    model.zero_grad();
    let zero;
    let d_h_gnn = if cfg.stop_gradient {
        zero = Tensor::zeros(v.d_h_gnn.rows(), v.d_h_gnn.cols());
        &zero
    } else {
        &v.d_h_gnn
    };
    model.backward(&v.d_projected, d_h_gnn, &v.d_recon)?;
    Ok((v, out))
}

/// Pretrains on `g` without linear-probe monitoring.
pub fn pretrain<T: Scalar>(g: &Graph<T>, cfg: &TrainConfig) -> Result<Pretrained<T>> {
    pretrain_with_probe(g, cfg, None::<fn(&SimMlp<T>) -> Result<f64>>)
}

/// Pretrains on `g`; `probe` is called every `cfg.probe_every` epochs.
pub fn pretrain_with_probe<T, F>(g: &Graph<T>, cfg: &TrainConfig, mut probe: Option<F>) -> Result<Pretrained<T>>
where
    T: Scalar,
    F: FnMut(&SimMlp<T>) -> Result<f64>,
{
    cfg.validate()?;
    let mut model = SimMlp::new(cfg.dims(g.n_features()), stream_seed(cfg.seed, "init"))?;
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut monitor = CollapseMonitor::default();
    let clean_adj = normalize(g, cfg.scheme);
    let aug_root = stream_seed(cfg.seed, "augment");

    for epoch in 1..=cfg.epochs {
        let (v, out) = if cfg.use_augmentation {
            let s = stream_seed(aug_root, &epoch.to_string());
            let view = augment(g, cfg.p_f, cfg.p_e, cfg.mask_mode, s)?;
            if cfg.two_views {
                let second = augment(g, cfg.p_f, cfg.p_e, cfg.mask_mode, stream_seed(s, "second"))?;
                let adj = normalize(&second.graph, cfg.scheme);
                loss_and_backward(&mut model, &view.graph.features, Some(&second.graph.features), &adj, &g.features, cfg)
            } else {
                let adj = normalize(&view.graph, cfg.scheme);
                loss_and_backward(&mut model, &view.graph.features, None, &adj, &g.features, cfg)
            }
        } else {
            loss_and_backward(&mut model, &g.features, None, &clean_adj, &g.features, cfg)
        }
        .map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { epoch },
            other => other,
        })?;
        if !v.total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let mut params = Vec::new();
        model.params_mut("", &mut params);
        opt.step(params)?;

        let probe_acc = match (&mut probe, cfg.probe_every) {
            (Some(f), k) if k > 0 && (epoch % k == 0 || epoch == cfg.epochs) => Some(f(&model)?),
            _ => None,
        };
        monitor.push(EpochRecord {
            epoch,
            loss: v.total,
            inv_term: v.inv_term,
            rec_term: v.rec_term,
            emb_std: out.h_mlp.mean_column_std(),
            probe_acc,
        })?;
    }
    Ok(Pretrained { model, monitor })
}
