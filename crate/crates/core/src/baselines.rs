//! Supervised MLP/GCN baselines and GLNN-style distillation.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::eval::accuracy;
use crate::graph::{normalize, Graph, Scheme, SplitSpec};
use crate::model::{GcnBaseline, Mlp, SavedModel};
use crate::numeric::{cross_entropy, kl_distill, AdamW, Mode, Module};
use crate::rng::{stream_seed, Rng};
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Mlp,
    Gcn,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(BaselineKind::Mlp),
            "gcn" => Ok(BaselineKind::Gcn),
            other => Err(Error::Config(format!("unknown baseline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisedConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    /// Number of linear layers.
    pub layers: usize,
    pub seed: u64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        SupervisedConfig {
            epochs: 200,
            lr: 1e-2,
            weight_decay: 5e-4,
            hidden: 256,
            layers: 2,
            seed: 0,
        }
    }
}

impl SupervisedConfig {
    fn dims(&self, d: usize, c: usize) -> Result<Vec<usize>> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::Config("baseline needs at least one layer and a positive width".into()));
        }
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(self.hidden, self.layers - 1));
        dims.push(c);
        Ok(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdConfig {
    pub lambda_kd: f64,
    pub temperature: f64,
}

impl Default for KdConfig {
    fn default() -> Self {
        KdConfig {
            lambda_kd: 1.0,
            temperature: 1.0,
        }
    }
}

impl KdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !(self.lambda_kd >= 0.0) {
            return Err(Error::Config(format!(
                "distillation needs temperature > 0 and lambda_kd >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedBaseline<T> {
    /// Parameters of the best-validation epoch.
    pub model: SavedModel<T>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub log: Vec<BaselineEpoch>,
}

fn labeled(g: &Graph<impl Scalar>, idx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    idx.iter()
        .filter_map(|&i| g.labels[i].map(|y| (i, y as usize)))
        .unzip()
}

/// Cross-entropy training on `split.train` with best-validation selection.
pub fn train_supervised<T: Scalar>(
    kind: BaselineKind,
    g: &Graph<T>,
    split: &SplitSpec,
    cfg: &SupervisedConfig,
) -> Result<TrainedBaseline<T>> {
    match kind {
        BaselineKind::Mlp => train_mlp(g, split, cfg, None),
        BaselineKind::Gcn => train_gcn(g, split, cfg),
    }
}

/// MLP student trained on labels plus `λ_kd Σ_{visible} KL(teacher ‖ student)`
/// at temperature `τ`; every node of `g` counts as visible.
pub fn train_glnn<T: Scalar>(
    cfg: &SupervisedConfig,
    teacher: Option<&GcnBaseline<T>>,
    g: &Graph<T>,
    split: &SplitSpec,
    kd: &KdConfig,
) -> Result<TrainedBaseline<T>> {
    kd.validate()?;
    let teacher = teacher.ok_or_else(|| Error::Config("distillation needs a trained teacher".into()))?;
    let t_logits = teacher.logits(&normalize(g, Scheme::Bi), &g.features)?;
    train_mlp(g, split, cfg, Some((&t_logits, *kd)))
}

fn train_mlp<T: Scalar>(
    g: &Graph<T>,
    split: &SplitSpec,
    cfg: &SupervisedConfig,
    kd: Option<(&Tensor<T>, KdConfig)>,
) -> Result<TrainedBaseline<T>> {
    let (rows, ys) = labeled(g, &split.train);
    if rows.is_empty() {
        return Err(Error::Config("empty labeled train set".into()));
    }
    let mut rng = Rng::seed_from_u64(stream_seed(cfg.seed, "init"));
    let mut model = Mlp::new(&cfg.dims(g.n_features(), g.n_classes)?, true, &mut rng)?;
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay);
    let all: Vec<usize> = (0..g.n_nodes()).collect();
    let mut best: Option<(f64, usize, Mlp<T>)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (logits, cache) = model.forward(&g.features, Mode::Train)?;
        let (mut loss, mut grad) = cross_entropy(&logits, &rows, &ys)?;
        if let Some((t, kd)) = kd {
            if kd.lambda_kd > 0.0 {
                let (kl, gk) = kl_distill(&logits, t, kd.temperature, &all)?;
                loss += kd.lambda_kd * kl;
                grad.add_assign(&gk.scale(T::of(kd.lambda_kd))?)?;
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        model.zero_grad();
        model.backward(&cache, &grad, false)?;
        let mut ps = Vec::new();
        model.params_mut("", &mut ps);
        opt.step(ps)?;

        let pred = model.infer(&g.features)?.argmax_rows();
        let rec = BaselineEpoch {
            epoch,
            loss,
            train_acc: accuracy(&pred, &split.train, g),
            val_acc: accuracy(&pred, &split.val, g),
        };
        if best.as_ref().is_none_or(|b| rec.val_acc > b.0) {
            best = Some((rec.val_acc, epoch, model.clone()));
        }
        log.push(rec);
    }
    let (best_val_acc, best_epoch, m) = best.ok_or_else(|| Error::Config("zero training epochs".into()))?;
    Ok(TrainedBaseline {
        model: SavedModel::Mlp(m),
        best_epoch,
        best_val_acc,
        log,
    })
}

fn train_gcn<T: Scalar>(g: &Graph<T>, split: &SplitSpec, cfg: &SupervisedConfig) -> Result<TrainedBaseline<T>> {
    let (rows, ys) = labeled(g, &split.train);
    if rows.is_empty() {
        return Err(Error::Config("empty labeled train set".into()));
    }
    let mut model = GcnBaseline::new(&cfg.dims(g.n_features(), g.n_classes)?, stream_seed(cfg.seed, "init"))?;
    let adj = normalize(g, Scheme::Bi);
    let adj_t = adj.transpose();
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay);
    let mut best: Option<(f64, usize, GcnBaseline<T>)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (logits, cache) = model.forward(&adj, &g.features)?;
        let (loss, grad) = cross_entropy(&logits, &rows, &ys)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        model.zero_grad();
        model.backward(&adj_t, &cache, &grad)?;
        let mut ps = Vec::new();
        model.params_mut("", &mut ps);
        opt.step(ps)?;

        let pred = model.logits(&adj, &g.features)?.argmax_rows();
        let rec = BaselineEpoch {
            epoch,
            loss,
            train_acc: accuracy(&pred, &split.train, g),
            val_acc: accuracy(&pred, &split.val, g),
        };
        if best.as_ref().is_none_or(|b| rec.val_acc > b.0) {
            best = Some((rec.val_acc, epoch, model.clone()));
        }
        log.push(rec);
    }
    let (best_val_acc, best_epoch, m) = best.ok_or_else(|| Error::Config("zero training epochs".into()))?;
    Ok(TrainedBaseline {
        model: SavedModel::Gcn(m),
        best_epoch,
        best_val_acc,
        log,
    })
}
