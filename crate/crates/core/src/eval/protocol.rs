use serde::{Deserialize, Serialize};

use super::{accuracy, linear_probe, mad_smoothness, mincut_score, EvalReport, MadDistance, ProbeConfig};
use crate::baselines::{train_glnn, train_supervised, BaselineKind, KdConfig, SupervisedConfig};
use crate::graph::{induced_subgraph, make_split, subgraph_without, Graph, Protocol, SplitSpec};
use crate::model::SavedModel;
use crate::pretrain::{pretrain, TrainConfig};
use crate::rng::stream_seed;
use crate::{Error, Result, Scalar, Tensor};

/// A trainable method together with all of its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    SimMlp {
        #[serde(default)]
        pretrain: TrainConfig,
        #[serde(default)]
        probe: ProbeConfig,
    },
    Mlp {
        #[serde(default)]
        train: SupervisedConfig,
    },
    Gcn {
        #[serde(default)]
        train: SupervisedConfig,
    },
    Glnn {
        #[serde(default)]
        student: SupervisedConfig,
        #[serde(default)]
        teacher: SupervisedConfig,
        #[serde(default)]
        kd: KdConfig,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SimMlp { .. } => "simmlp",
            Method::Mlp { .. } => "mlp",
            Method::Gcn { .. } => "gcn",
            Method::Glnn { .. } => "glnn",
        }
    }

    /// Copy with every training seed set to `seed`.
    pub fn with_seed(&self, seed: u64) -> Method {
        let mut m = self.clone();
        match &mut m {
            Method::SimMlp { pretrain, .. } => pretrain.seed = seed,
            Method::Mlp { train } | Method::Gcn { train } => train.seed = seed,
            Method::Glnn { student, teacher, .. } => {
                student.seed = seed;
                teacher.seed = stream_seed(seed, "teacher");
            }
        }
        m
    }

    /// How the trained model turns embeddings into class predictions.
    pub fn readout(&self) -> Readout {
        match self {
            Method::SimMlp { probe, .. } => Readout::Probe(*probe),
            _ => Readout::Logits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Readout {
    /// Logistic regression on frozen embeddings, fit on the split's train nodes.
    Probe(ProbeConfig),
    /// Argmax of the model's own class logits.
    Logits,
}

/// Trains `method` on `g`; the supervised methods use `split.train`/`split.val`.
pub fn fit<T: Scalar>(method: &Method, g: &Graph<T>, split: &SplitSpec) -> Result<SavedModel<T>> {
    Ok(match method {
        Method::SimMlp { pretrain: cfg, .. } => SavedModel::SimMlp(pretrain(g, cfg)?.model),
        Method::Mlp { train } => train_supervised(BaselineKind::Mlp, g, split, train)?.model,
        Method::Gcn { train } => train_supervised(BaselineKind::Gcn, g, split, train)?.model,
        Method::Glnn { student, teacher, kd } => {
            let t = match train_supervised(BaselineKind::Gcn, g, split, teacher)?.model {
                SavedModel::Gcn(t) => t,
                _ => unreachable!("gcn training yields a gcn"),
            };
            train_glnn(student, Some(&t), g, split, kd)?.model
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Compute smoothness and min-cut on transductive runs.
    pub metrics: bool,
    pub mad_distance: MadDistance,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            metrics: true,
            mad_distance: MadDistance::Cosine,
        }
    }
}

/// Scores of one split.
#[derive(Debug, Clone)]
pub struct Scored<T> {
    pub record: RunRecord,
    /// Predicted class of every node of the inference graph.
    pub predictions: Vec<usize>,
    pub embeddings: Tensor<T>,
}

/// Per-seed results. Which arms are present depends on the protocol.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trans: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ind: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prod: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mincut: Option<f64>,
    /// Labeled nodes in the `V^T` test arm.
    pub n_trans: usize,
    /// Labeled nodes in `V^I`.
    pub n_ind: usize,
}

/// `(n_trans·trans + n_ind·ind) / (n_trans + n_ind)`.
pub fn prod_accuracy(trans: f64, n_trans: usize, ind: f64, n_ind: usize) -> f64 {
    let total = n_trans + n_ind;
    if total == 0 {
        return 0.0;
    }
    (n_trans as f64 * trans + n_ind as f64 * ind) / total as f64
}

fn n_labeled<T: Scalar>(g: &Graph<T>, idx: &[usize]) -> usize {
    idx.iter().filter(|&&i| g.labels[i].is_some()).count()
}

/// Scores a trained model on `split` of the full graph `g`.
///
/// Transductive runs predict on `g` itself. Inductive runs cut the edges
/// between `V^I` and `V^T`; cold-start runs isolate `V^I` completely and
/// report only the `V^I` arm.
pub fn score_split<T: Scalar>(
    model: &SavedModel<T>,
    readout: Readout,
    g: &Graph<T>,
    split: &SplitSpec,
) -> Result<Scored<T>> {
    split.validate(g.n_nodes())?;
    let cut;
    let view = match split.protocol {
        Protocol::Transductive => g,
        Protocol::Inductive => {
            cut = subgraph_without(g, &split.inductive, false);
            &cut
        }
        Protocol::Coldstart => {
            cut = subgraph_without(g, &split.inductive, true);
            &cut
        }
    };
    let embeddings = model.embed(view)?;
    let predictions = match readout {
        Readout::Probe(cfg) => {
            linear_probe(&embeddings, &view.labels, view.n_classes, &split.train, &split.val, &cfg)?.predictions
        }
        Readout::Logits => model
            .logits(view)?
            .ok_or_else(|| Error::Eval(format!("{} checkpoint has no classifier head; use a probe", model.kind())))?
            .argmax_rows(),
    };
    let mut record = RunRecord {
        seed: split.seed,
        n_trans: n_labeled(g, &split.test),
        n_ind: n_labeled(g, &split.inductive),
        ..RunRecord::default()
    };
    let trans = accuracy(&predictions, &split.test, g);
    let ind = accuracy(&predictions, &split.inductive, g);
    match split.protocol {
        Protocol::Transductive => {
            record.trans = Some(trans);
            record.accuracy = Some(trans);
        }
        Protocol::Inductive => {
            let prod = prod_accuracy(trans, record.n_trans, ind, record.n_ind);
            record.trans = Some(trans);
            record.ind = Some(ind);
            record.prod = Some(prod);
            record.accuracy = Some(prod);
        }
        Protocol::Coldstart => record.ind = Some(ind),
    }
    Ok(Scored {
        record,
        predictions,
        embeddings,
    })
}

/// The training graph of a split (`V^T` only for inductive protocols) and
/// the split renumbered into it.
pub(crate) fn training_view<T: Scalar>(g: &Graph<T>, split: &SplitSpec) -> (Graph<T>, SplitSpec) {
    if split.protocol == Protocol::Transductive {
        return (g.clone(), split.clone());
    }
    let visible = split.visible(g.n_nodes());
    let mut local = vec![usize::MAX; g.n_nodes()];
    for (k, &i) in visible.iter().enumerate() {
        local[i] = k;
    }
    let remap = |v: &[usize]| v.iter().map(|&i| local[i]).collect();
    let sub = SplitSpec {
        protocol: Protocol::Transductive,
        seed: split.seed,
        train: remap(&split.train),
        val: remap(&split.val),
        test: remap(&split.test),
        inductive: Vec::new(),
    };
    (induced_subgraph(g, &visible), sub)
}

/// Trains on the split's training view and scores on its inference view.
pub fn run_split<T: Scalar>(method: &Method, g: &Graph<T>, split: &SplitSpec, opts: &EvalOptions) -> Result<RunRecord> {
    let (train_g, local) = training_view(g, split);
    let model = fit(method, &train_g, &local)?;
    let s = score_split(&model, method.readout(), g, split)?;
    let mut record = s.record;
    if opts.metrics && split.protocol == Protocol::Transductive {
        record.mad = Some(mad_smoothness(&s.embeddings, g, opts.mad_distance)?);
        record.mincut = Some(mincut_score(&s.predictions, g)?);
    }
    Ok(record)
}

/// One seeded run: split, train and score.
pub fn run_once<T: Scalar>(
    method: &Method,
    g: &Graph<T>,
    protocol: Protocol,
    seed: u64,
    opts: &EvalOptions,
) -> Result<RunRecord> {
    let split = make_split(g, protocol, stream_seed(seed, "split"))?;
    let mut r = run_split(&method.with_seed(seed), g, &split, opts)?;
    r.seed = seed;
    Ok(r)
}

/// Runs every seed and aggregates.
pub fn evaluate<T: Scalar>(
    method: &Method,
    g: &Graph<T>,
    protocol: Protocol,
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let runs = seeds
        .iter()
        .map(|&s| run_once(method, g, protocol, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let config = serde_json::to_value(method)?;
    Ok(EvalReport::from_runs(protocol.as_str(), method.name(), runs, config))
}

/// Cold-start accuracy on `V^I` of one seeded run.
pub fn eval_coldstart<T: Scalar>(method: &Method, g: &Graph<T>, seed: u64) -> Result<f64> {
    let r = run_once(method, g, Protocol::Coldstart, seed, &EvalOptions::default())?;
    r.ind.ok_or_else(|| Error::Eval("cold-start run produced no inductive arm".into()))
}
