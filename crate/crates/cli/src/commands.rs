use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use simmlp::baselines::{train_glnn, train_supervised, BaselineKind, KdConfig, SupervisedConfig};
use simmlp::bench::{bench_inference, make_synthetic, BenchConfig};
use simmlp::eval::{
    eval_linkpred, evaluate, linear_probe, mad_smoothness, mincut_score, robustness_sweep, score_split, Axis,
    EvalOptions, EvalReport, Method, ProbeConfig, Readout, RunRecord,
};
use simmlp::graph::{load_dataset, make_split, save_splits, Graph, Protocol, Scheme};
use simmlp::model::{GcnBaseline, SavedModel, SimMlp, SimMlpDims};
use simmlp::pretrain::{pretrain_with_probe, TrainConfig};
use simmlp::rng::{stream, stream_seed};
use simmlp::Scalar;

use crate::manifest::{DatasetRef, RunManifest};
use crate::{BaselineModel, Cli, Command, EvalProtocol, Precision, ReadoutArg, SweepAxis};

/// Invalid command-line usage detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ArgError(String);

/// Short machine-readable class of a failure.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<ArgError>() {
            return "argument";
        }
        if let Some(err) = cause.downcast_ref::<simmlp::Error>() {
            return match err {
                simmlp::Error::Config(_) => "config",
                simmlp::Error::Dataset { .. } => "dataset",
                simmlp::Error::Checkpoint(_) => "checkpoint",
                simmlp::Error::Shape { .. } => "shape",
                simmlp::Error::Eval(_) => "eval",
                simmlp::Error::Diverged { .. } | simmlp::Error::NonFinite(_) => "numeric",
                simmlp::Error::Io(_) => "io",
                simmlp::Error::Json(_) => "json",
                _ => "runtime",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
    }
    "input"
}

/// `arg` itself if it exists, else `$SIMMLP_DATA_DIR/arg`.
fn resolve_dataset(arg: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(arg);
    if direct.join("meta.json").exists() {
        return Ok(direct);
    }
    let root = std::env::var_os("SIMMLP_DATA_DIR");
    if let Some(root) = &root {
        let p = Path::new(root).join(arg);
        if p.join("meta.json").exists() {
            return Ok(p);
        }
    }
    let looked = match root {
        Some(r) => format!("{arg} and {}", Path::new(&r).join(arg).display()),
        None => format!("{arg} ($SIMMLP_DATA_DIR is not set)"),
    };
    Err(ArgError(format!("no dataset (meta.json) found at {looked}")).into())
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_json<C: for<'de> Deserialize<'de>>(path: &Path) -> Result<C> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| simmlp::Error::Config(e.to_string()))
        .with_context(|| format!("invalid config {}", path.display()))
}

fn seeds_from(root: u64, n: u64) -> Vec<u64> {
    (0..n).map(|k| root + k).collect()
}

/// A built-in method name or a JSON method file.
fn resolve_method(arg: Option<&str>, dataset: &Path) -> Result<Method> {
    let name = arg.unwrap_or("simmlp");
    Ok(match name {
        "simmlp" => Method::SimMlp {
            pretrain: TrainConfig::preset(&dataset_name(dataset)).unwrap_or_default(),
            probe: ProbeConfig::default(),
        },
        "mlp" => Method::Mlp {
            train: SupervisedConfig::default(),
        },
        "gcn" => Method::Gcn {
            train: SupervisedConfig::default(),
        },
        "glnn" => Method::Glnn {
            student: SupervisedConfig::default(),
            teacher: SupervisedConfig::default(),
            kd: KdConfig::default(),
        },
        path if Path::new(path).is_file() => read_json(Path::new(path))?,
        other => bail!(ArgError(format!(
            "unknown method `{other}`: expected simmlp, mlp, gcn, glnn or a JSON method file"
        ))),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn print_json(v: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

macro_rules! dispatch {
    ($p:expr, $f:ident($($a:expr),* $(,)?)) => {
        match $p {
            Precision::F32 => $f::<f32>($($a),*),
            Precision::F64 => $f::<f64>($($a),*),
        }
    };
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads as usize;
    let root_seed = cli.seed.unwrap_or(0);
    let out = cli.out.clone();
    match cli.command {
        Command::Convert {
            edges,
            features,
            labels,
            header,
        } => {
            let config = json!({ "edges": edges, "features": features, "labels": labels, "header": header });
            let mut m = RunManifest::new("convert", config, "f32", threads);
            m.outputs = ["meta.json", "edges.bin", "features.bin", "labels.bin"].map(|f| out.join(f)).to_vec();
            m.write(&out)?;
            let c = crate::convert::convert(&edges, &features, labels.as_deref(), &out, header)?;
            print_json(&c)
        }
        Command::Pretrain { data, config } => {
            let dir = resolve_dataset(&data)?;
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                    TrainConfig::from_json(&text).with_context(|| format!("invalid config {}", p.display()))?
                }
                None => TrainConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let p = cli.precision.unwrap_or(Precision::F64);
            let mut m = RunManifest::new("pretrain", serde_json::to_value(&cfg)?, p.name(), threads);
            m.dataset = Some(DatasetRef::of(&dir)?);
            m.seeds = vec![cfg.seed];
            m.outputs = vec![out.join("model.ckpt"), out.join("train_log.jsonl")];
            m.write(&out)?;
            dispatch!(p, pretrain_cmd(&dir, &cfg, &out))
        }
        Command::TrainBaseline {
            model,
            data,
            config,
            teacher,
        } => {
            let dir = resolve_dataset(&data)?;
            if teacher.is_some() && model != BaselineModel::Glnn {
                bail!(ArgError("--teacher only applies to --model glnn".into()));
            }
            let mut cfg: BaselineSettings = match (&config, model) {
                (Some(p), BaselineModel::Glnn) => read_json(p)?,
                (Some(p), _) => BaselineSettings {
                    student: read_json(p)?,
                    ..BaselineSettings::default()
                },
                (None, _) => BaselineSettings::default(),
            };
            let seed = cli.seed.unwrap_or(cfg.student.seed);
            cfg.student.seed = seed;
            cfg.teacher.seed = stream_seed(seed, "teacher");
            cfg.kd.validate()?;
            let p = cli.precision.unwrap_or(Precision::F64);
            let config_echo = match model {
                BaselineModel::Glnn => json!({ "model": "glnn", "student": cfg.student, "teacher": cfg.teacher,
                    "kd": cfg.kd, "teacher_checkpoint": teacher }),
                BaselineModel::Mlp => json!({ "model": "mlp", "train": cfg.student }),
                BaselineModel::Gcn => json!({ "model": "gcn", "train": cfg.student }),
            };
            let mut m = RunManifest::new("train-baseline", config_echo, p.name(), threads);
            m.dataset = Some(DatasetRef::of(&dir)?);
            m.seeds = vec![seed];
            m.outputs = vec![out.join("model.ckpt"), out.join("train_log.jsonl"), out.join("splits.json")];
            m.write(&out)?;
            dispatch!(p, baseline_cmd(&dir, model, &cfg, teacher.as_deref(), &out))
        }
        Command::Eval {
            protocol,
            data,
            checkpoint,
            method,
            seeds,
            readout,
            no_metrics,
        } => {
            let dir = resolve_dataset(&data)?;
            let seeds = seeds_from(root_seed, seeds);
            let p = cli.precision.unwrap_or(Precision::F64);
            let opts = EvalOptions {
                metrics: !no_metrics,
                ..EvalOptions::default()
            };
            let target = match &checkpoint {
                Some(ck) => {
                    if protocol == EvalProtocol::Linkpred {
                        bail!(ArgError(
                            "link prediction retrains on the edge holdout; pass --method instead of --checkpoint".into()
                        ));
                    }
                    if method.is_some() {
                        bail!(ArgError("--checkpoint and --method are exclusive".into()));
                    }
                    EvalTarget::Checkpoint(ck.clone(), readout)
                }
                None => {
                    if readout.is_some() {
                        bail!(ArgError("--readout only applies to --checkpoint".into()));
                    }
                    EvalTarget::Method(resolve_method(method.as_deref(), &dir)?)
                }
            };
            let config = json!({ "protocol": protocol_name(protocol), "target": target.echo(), "options": opts });
            let mut m = RunManifest::new("eval", config, p.name(), threads);
            m.dataset = Some(DatasetRef::of(&dir)?);
            m.seeds = seeds.clone();
            m.outputs = vec![out.join("report.json")];
            m.write(&out)?;
            let report = dispatch!(p, eval_cmd(&dir, protocol, &target, &seeds, &opts))?;
            write_file(&out.join("report.json"), &serde_json::to_vec_pretty(&report)?)?;
            print_json(&report)
        }
        Command::Sweep {
            axis,
            levels,
            data,
            method,
            seeds,
        } => {
            let dir = resolve_dataset(&data)?;
            let seeds = seeds_from(root_seed, seeds);
            let method = resolve_method(method.as_deref(), &dir)?;
            let axis = match axis {
                SweepAxis::Feature => Axis::Feature,
                SweepAxis::Edge => Axis::Edge,
                SweepAxis::Label => Axis::Label,
            };
            let p = cli.precision.unwrap_or(Precision::F64);
            let config = json!({ "axis": axis, "levels": levels, "method": method });
            let mut m = RunManifest::new("sweep", config, p.name(), threads);
            m.dataset = Some(DatasetRef::of(&dir)?);
            m.seeds = seeds.clone();
            m.outputs = vec![out.join("sweep.csv"), out.join("sweep.json")];
            m.write(&out)?;
            let curve = dispatch!(p, sweep_cmd(&dir, &method, axis, &levels, &seeds, threads))?;
            let csv = simmlp::eval::curve_csv(&curve);
            write_file(&out.join("sweep.csv"), csv.as_bytes())?;
            write_file(&out.join("sweep.json"), &serde_json::to_vec_pretty(&curve)?)?;
            print!("{csv}");
            Ok(())
        }
        Command::Bench {
            data,
            nodes,
            degree,
            features,
            hidden,
            hops,
            targets,
            reps,
            warmup,
            mlp_checkpoint,
            gcn_checkpoint,
        } => {
            let dir = data.as_deref().map(resolve_dataset).transpose()?;
            let p = cli.precision.unwrap_or(Precision::F32);
            let args = BenchArgs {
                graph: match &dir {
                    Some(_) => None,
                    None => Some((nodes, degree, features)),
                },
                hidden,
                hops,
                targets,
                cfg: BenchConfig {
                    reps,
                    warmup,
                    workers: threads,
                },
                mlp_checkpoint,
                gcn_checkpoint,
                seed: root_seed,
            };
            args.cfg.validate()?;
            let mut m = RunManifest::new("bench", serde_json::to_value(&args)?, p.name(), threads);
            m.dataset = dir.as_deref().map(DatasetRef::of).transpose()?;
            m.seeds = vec![root_seed];
            m.outputs = vec![out.join("latency.json")];
            m.write(&out)?;
            let report = dispatch!(p, bench_cmd(dir.as_deref(), &args))?;
            write_file(&out.join("latency.json"), &serde_json::to_vec_pretty(&report)?)?;
            print!("{}", report.table());
            Ok(())
        }
    }
}

fn pretrain_cmd<T: Scalar>(dir: &Path, cfg: &TrainConfig, out: &Path) -> Result<()> {
    let g = load_dataset::<T>(dir)?;
    let split = if cfg.probe_every > 0 && g.has_labels() {
        Some(make_split(&g, Protocol::Transductive, stream_seed(cfg.seed, "split"))?)
    } else {
        None
    };
    // monitoring reads validation accuracy only
    let probe = split.as_ref().map(|s| {
        let g = &g;
        move |m: &SimMlp<T>| {
            let emb = m.encode_mlp(&g.features)?;
            Ok(linear_probe(&emb, &g.labels, g.n_classes, &s.train, &s.val, &ProbeConfig::default())?.best_val_acc)
        }
    });
    let res = pretrain_with_probe(&g, cfg, probe)?;
    SavedModel::SimMlp(res.model).save(out.join("model.ckpt"))?;
    let mut log = Vec::new();
    res.monitor.write_jsonl(&mut log)?;
    write_file(&out.join("train_log.jsonl"), &log)?;
    let last = res.monitor.last().ok_or_else(|| anyhow!("training ran zero epochs"))?;
    print_json(&json!({ "epochs": last.epoch, "loss": last.loss, "emb_std": last.emb_std,
        "checkpoint": out.join("model.ckpt") }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BaselineSettings {
    student: SupervisedConfig,
    teacher: SupervisedConfig,
    kd: KdConfig,
}

fn baseline_cmd<T: Scalar>(
    dir: &Path,
    model: BaselineModel,
    cfg: &BaselineSettings,
    teacher: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let g = load_dataset::<T>(dir)?;
    let split = make_split(&g, Protocol::Transductive, stream_seed(cfg.student.seed, "split"))?;
    save_splits(&split, out.join("splits.json"))?;
    let trained = match model {
        BaselineModel::Mlp => train_supervised(BaselineKind::Mlp, &g, &split, &cfg.student)?,
        BaselineModel::Gcn => train_supervised(BaselineKind::Gcn, &g, &split, &cfg.student)?,
        BaselineModel::Glnn => {
            let t = match teacher {
                Some(p) => SavedModel::<T>::load(p).with_context(|| format!("cannot load teacher {}", p.display()))?,
                None => train_supervised(BaselineKind::Gcn, &g, &split, &cfg.teacher)?.model,
            };
            let SavedModel::Gcn(t) = t else {
                bail!(ArgError(format!("the glnn teacher must be a gcn checkpoint, got {}", t.kind())));
            };
            train_glnn(&cfg.student, Some(&t), &g, &split, &cfg.kd)?
        }
    };
    trained.model.save(out.join("model.ckpt"))?;
    let mut log = Vec::new();
    for r in &trained.log {
        serde_json::to_writer(&mut log, r)?;
        log.push(b'\n');
    }
    write_file(&out.join("train_log.jsonl"), &log)?;
    let logits = trained.model.logits(&g)?.ok_or_else(|| anyhow!("baseline has no classifier head"))?;
    let test_acc = simmlp::eval::accuracy(&logits.argmax_rows(), &split.test, &g);
    print_json(&json!({ "model": trained.model.kind(), "best_epoch": trained.best_epoch,
        "best_val_acc": trained.best_val_acc, "test_acc": test_acc, "checkpoint": out.join("model.ckpt") }))
}

fn protocol_name(p: EvalProtocol) -> &'static str {
    match p {
        EvalProtocol::Transductive => "transductive",
        EvalProtocol::Inductive => "inductive",
        EvalProtocol::Coldstart => "coldstart",
        EvalProtocol::Linkpred => "linkpred",
    }
}

enum EvalTarget {
    Checkpoint(PathBuf, Option<ReadoutArg>),
    Method(Method),
}

impl EvalTarget {
    fn echo(&self) -> Value {
        match self {
            EvalTarget::Checkpoint(p, r) => json!({ "checkpoint": p, "readout": r.map(|r| match r {
                ReadoutArg::Probe => "probe",
                ReadoutArg::Logits => "logits",
            }) }),
            EvalTarget::Method(m) => serde_json::to_value(m).unwrap_or(Value::Null),
        }
    }
}

fn eval_cmd<T: Scalar>(
    dir: &Path,
    protocol: EvalProtocol,
    target: &EvalTarget,
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let g = load_dataset::<T>(dir)?;
    let node_protocol = match protocol {
        EvalProtocol::Transductive => Protocol::Transductive,
        EvalProtocol::Inductive => Protocol::Inductive,
        EvalProtocol::Coldstart => Protocol::Coldstart,
        EvalProtocol::Linkpred => {
            let EvalTarget::Method(method) = target else {
                unreachable!("checked before dispatch")
            };
            let mut runs = Vec::new();
            for &s in seeds {
                let r = eval_linkpred(method, &g, s)?;
                runs.push(RunRecord {
                    seed: s,
                    auc: Some(r.test_auc),
                    ..RunRecord::default()
                });
            }
            return Ok(EvalReport::from_runs("linkpred", method.name(), runs, serde_json::to_value(method)?));
        }
    };
    match target {
        EvalTarget::Method(method) => Ok(evaluate(method, &g, node_protocol, seeds, opts)?),
        EvalTarget::Checkpoint(path, readout) => {
            let model = SavedModel::<T>::load(path).with_context(|| format!("cannot load {}", path.display()))?;
            check_dims(&model, &g, path, dir)?;
            let readout = match readout.unwrap_or(match model {
                SavedModel::SimMlp(_) => ReadoutArg::Probe,
                _ => ReadoutArg::Logits,
            }) {
                ReadoutArg::Probe => Readout::Probe(ProbeConfig::default()),
                ReadoutArg::Logits => Readout::Logits,
            };
            let mut runs = Vec::new();
            for &s in seeds {
                let split = make_split(&g, node_protocol, stream_seed(s, "split"))?;
                let scored = score_split(&model, readout, &g, &split)?;
                let mut r = scored.record;
                r.seed = s;
                if opts.metrics && node_protocol == Protocol::Transductive {
                    r.mad = Some(mad_smoothness(&scored.embeddings, &g, opts.mad_distance)?);
                    r.mincut = Some(mincut_score(&scored.predictions, &g)?);
                }
                runs.push(r);
            }
            let config = json!({ "checkpoint": path, "readout": match readout {
                Readout::Probe(c) => json!({ "probe": c }),
                Readout::Logits => json!("logits"),
            } });
            Ok(EvalReport::from_runs(node_protocol.as_str(), model.kind(), runs, config))
        }
    }
}

fn check_dims<T: Scalar>(model: &SavedModel<T>, g: &Graph<T>, path: &Path, dir: &Path) -> Result<()> {
    if model.in_dim() != g.n_features() {
        bail!(simmlp::Error::Config(format!(
            "{} checkpoint {} takes {} input features but dataset {} has {}; \
             evaluate it on the dataset it was trained on or retrain on this one",
            model.kind(),
            path.display(),
            model.in_dim(),
            dir.display(),
            g.n_features()
        )));
    }
    Ok(())
}

fn sweep_cmd<T: Scalar>(
    dir: &Path,
    method: &Method,
    axis: Axis,
    levels: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<simmlp::eval::CurvePoint>> {
    let g = load_dataset::<T>(dir)?;
    Ok(robustness_sweep(method, &g, axis, levels, seeds, threads)?)
}

#[derive(Debug, Clone, Serialize)]
struct BenchArgs {
    /// Synthetic `(nodes, avg degree, features)` when no dataset is given.
    graph: Option<(usize, f64, usize)>,
    hidden: usize,
    hops: usize,
    targets: usize,
    cfg: BenchConfig,
    mlp_checkpoint: Option<PathBuf>,
    gcn_checkpoint: Option<PathBuf>,
    seed: u64,
}

fn bench_cmd<T: Scalar>(dir: Option<&Path>, a: &BenchArgs) -> Result<simmlp::bench::LatencyReport> {
    let g: Graph<T> = match (dir, a.graph) {
        (Some(d), _) => load_dataset(d)?,
        (None, Some((n, deg, d))) => {
            if n < 2 || !(deg > 0.0 && deg < n as f64) || d == 0 {
                bail!(ArgError(format!(
                    "synthetic graph needs >= 2 nodes, 0 < degree < nodes and >= 1 feature, got {n}, {deg}, {d}"
                )));
            }
            make_synthetic(n, deg, d, stream_seed(a.seed, "graph"))
        }
        (None, None) => unreachable!("bench always has a graph source"),
    };
    let d = g.n_features();
    let mlp = match &a.mlp_checkpoint {
        Some(p) => match SavedModel::<T>::load(p)? {
            SavedModel::SimMlp(m) => m,
            other => bail!(ArgError(format!("--mlp-checkpoint must be a simmlp checkpoint, got {}", other.kind()))),
        },
        None => SimMlp::new(
            SimMlpDims {
                in_dim: d,
                hidden: a.hidden,
                mlp_layers: 2,
                hops: a.hops,
                scheme: Scheme::Bi,
                shared_encoder: true,
            },
            stream_seed(a.seed, "init"),
        )?,
    };
    let gcn = match &a.gcn_checkpoint {
        Some(p) => match SavedModel::<T>::load(p)? {
            SavedModel::Gcn(m) => m,
            other => bail!(ArgError(format!("--gcn-checkpoint must be a gcn checkpoint, got {}", other.kind()))),
        },
        None => {
            let mut dims = vec![d];
            dims.extend(std::iter::repeat_n(a.hidden, a.hops.max(1)));
            GcnBaseline::new(&dims, stream_seed(a.seed, "init"))?
        }
    };
    for (kind, in_dim) in [("simmlp", mlp.dims.in_dim), ("gcn", gcn.dims()[0])] {
        if in_dim != d {
            bail!(simmlp::Error::Config(format!(
                "{kind} checkpoint takes {in_dim} input features but the graph has {d}"
            )));
        }
    }
    let n_targets = a.targets.min(g.n_nodes());
    if n_targets == 0 {
        bail!(ArgError("--targets must be positive".into()));
    }
    let targets = sample(&mut stream(a.seed, "targets"), g.n_nodes(), n_targets).into_vec();
    Ok(bench_inference(&mlp, &gcn, &g, &targets, &a.cfg)?)
}
