use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use simmlp::graph::synthetic::PlantedPartition;
use simmlp::graph::{load_dataset, save_dataset};
use simmlp::pretrain::TrainConfig;
use tempfile::TempDir;

fn simmlp(args: &[&str]) -> Output {
    simmlp_env(args, None)
}

fn simmlp_env(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simmlp"));
    c.args(args).env_remove("SIMMLP_DATA_DIR");
    if let Some(d) = data_dir {
        c.env("SIMMLP_DATA_DIR", d);
    }
    c.output().expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Asserts failure with a single-line JSON error and returns it.
fn fails(o: &Output) -> Value {
    assert!(!o.status.success(), "unexpected success: {}", String::from_utf8_lossy(&o.stdout));
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    let v: Value = serde_json::from_str(err.trim()).unwrap_or_else(|e| panic!("{e}: {err}"));
    assert!(v["error"].is_string() && v["message"].is_string(), "{v}");
    v
}

fn json_file(p: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&fs::read(p.as_ref()).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small labeled homophilous dataset written in the binary layout.
fn dataset(root: &Path, name: &str, n_features: usize) -> PathBuf {
    let g = PlantedPartition {
        n_nodes: 120,
        n_classes: 3,
        n_features,
        avg_degree: 5.0,
        homophily: 0.85,
        words_per_node: 5,
        signal: 0.8,
    }
    .generate::<f64>(7);
    let dir = root.join(name);
    save_dataset(&g, &dir).unwrap();
    dir
}

fn small_pretrain(tmp: &TempDir, data: &Path, out: &str) -> PathBuf {
    let cfg = tmp.path().join("small.json");
    fs::write(&cfg, r#"{"epochs": 5, "hidden": 16, "lr": 0.01}"#).unwrap();
    let out = tmp.path().join(out);
    ok(&simmlp(&["pretrain", "--data", s(data), "--config", s(&cfg), "--out", s(&out)]));
    out
}

#[test]
fn convert_toy_fixture_round_trips() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    fs::write(p.join("edges.tsv"), "0\t1\n1\t2\n").unwrap();
    fs::write(p.join("features.csv"), "0,1.0,0.0\n1,0.5,0.5\n2,0.0,1.0\n").unwrap();
    fs::write(p.join("labels.csv"), "0,0\n1,1\n2,1\n").unwrap();
    let out = p.join("toy");
    let stdout = ok(&simmlp(&[
        "convert",
        "--edges",
        s(&p.join("edges.tsv")),
        "--features",
        s(&p.join("features.csv")),
        "--labels",
        s(&p.join("labels.csv")),
        "--out",
        s(&out),
    ]));
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["n_nodes"], 3);
    assert_eq!(json_file(out.join("meta.json"))["n_nodes"], 3);
    assert_eq!(json_file(out.join("manifest.json"))["command"], "convert");
    let g = load_dataset::<f64>(&out).unwrap();
    assert_eq!((g.n_edges(), g.n_classes), (2, 2));
    assert_eq!(g.labels, vec![Some(0), Some(1), Some(1)]);
}

#[test]
fn convert_rejects_gaps_ragged_rows_and_bad_endpoints() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path();
    let run = |edges: &str, feats: &str| {
        fs::write(p.join("e.tsv"), edges).unwrap();
        fs::write(p.join("f.csv"), feats).unwrap();
        let o = simmlp(&[
            "convert",
            "--edges",
            s(&p.join("e.tsv")),
            "--features",
            s(&p.join("f.csv")),
            "--out",
            s(&p.join("out")),
        ]);
        fails(&o)["message"].as_str().unwrap().to_string()
    };
    let gap = run("0\t2\n2\t5\n", "0,1\n2,1\n5,1\n");
    assert!(gap.contains("contiguous") && gap.contains("remap"), "{gap}");
    assert!(run("0\t1\n", "0,1,2\n1,1\n").contains("ragged"));
    assert!(run("0\tx\n", "0,1\n1,1\n").contains("not a non-negative integer"));
}

#[test]
fn pretrain_echoes_defaults_and_rejects_unknown_keys() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let out = small_pretrain(&tmp, &data, "run");
    let m = json_file(out.join("manifest.json"));
    assert_eq!(m["config"]["epochs"], 5);
    assert_eq!(m["config"]["gamma"], 1.0);
    assert_eq!(m["config"]["p_f"], 0.5);
    assert_eq!(m["dataset"]["sha256"].as_str().unwrap().len(), 64);
    assert!(out.join("model.ckpt").exists());
    assert_eq!(fs::read_to_string(out.join("train_log.jsonl")).unwrap().lines().count(), 5);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"epoch": 5}"#).unwrap();
    let o = simmlp(&["pretrain", "--data", s(&data), "--config", s(&bad), "--out", s(&tmp.path().join("x"))]);
    let e = fails(&o);
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("epoch"), "{e}");
}

#[test]
fn equal_manifests_give_equal_checkpoints() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let a = small_pretrain(&tmp, &data, "a");
    let b = small_pretrain(&tmp, &data, "b");
    let (ma, mb) = (json_file(a.join("manifest.json")), json_file(b.join("manifest.json")));
    assert_eq!(ma["config"], mb["config"]);
    assert_eq!(ma["dataset"], mb["dataset"]);
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
    assert_eq!(fs::read(a.join("train_log.jsonl")).unwrap(), fs::read(b.join("train_log.jsonl")).unwrap());
}

#[test]
fn shipped_cora_config_runs_end_to_end() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/cora.json");
    let cfg = TrainConfig::from_json(&fs::read_to_string(&fixture).unwrap()).unwrap();
    assert_eq!(cfg, TrainConfig::cora());
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let out = tmp.path().join("cora-run");
    let stdout = ok(&simmlp(&[
        "pretrain",
        "--data",
        s(&data),
        "--config",
        s(&fixture),
        "--precision",
        "f32",
        "--out",
        s(&out),
    ]));
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["epochs"], 1000);
    assert!(v["loss"].as_f64().unwrap().is_finite());
}

#[test]
fn eval_checkpoint_protocols() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let run = small_pretrain(&tmp, &data, "run");
    let ck = run.join("model.ckpt");
    let eval = |protocol: &str, seeds: &str, out: &str| {
        let out = tmp.path().join(out);
        let o = simmlp(&[
            "eval",
            "--protocol",
            protocol,
            "--data",
            s(&data),
            "--checkpoint",
            s(&ck),
            "--seeds",
            seeds,
            "--out",
            s(&out),
        ]);
        ok(&o);
        json_file(out.join("report.json"))
    };
    let r = eval("transductive", "1", "t");
    let acc = r["accuracy"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(r["mad"].is_object() && r["mincut"].is_object());

    let r = eval("coldstart", "1", "c");
    assert!(r["ind"].is_object());
    for k in ["accuracy", "trans", "prod"] {
        assert!(r.get(k).is_none(), "{k} in coldstart report");
    }

    let r = eval("transductive", "10", "ten");
    assert_eq!(r["accuracy"]["n"], 10);
    assert_eq!(r["runs"].as_array().unwrap().len(), 10);
    assert_eq!(r["seeds"].as_array().unwrap().len(), 10);
}

#[test]
fn eval_reports_dimension_mismatch() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let other = dataset(tmp.path(), "wider", 40);
    let run = small_pretrain(&tmp, &data, "run");
    let o = simmlp(&[
        "eval",
        "--protocol",
        "transductive",
        "--data",
        s(&other),
        "--checkpoint",
        s(&run.join("model.ckpt")),
        "--out",
        s(&tmp.path().join("e")),
    ]);
    let e = fails(&o);
    assert_eq!(e["error"], "config");
    let msg = e["message"].as_str().unwrap();
    assert!(msg.contains("30 input features") && msg.contains("has 40"), "{msg}");
}

#[test]
fn eval_methods_and_link_prediction() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let method = tmp.path().join("mlp.json");
    fs::write(&method, r#"{"method": "mlp", "train": {"epochs": 20, "hidden": 16}}"#).unwrap();
    let out = tmp.path().join("inductive");
    ok(&simmlp(&[
        "eval",
        "--protocol",
        "inductive",
        "--data",
        s(&data),
        "--method",
        s(&method),
        "--seeds",
        "2",
        "--out",
        s(&out),
    ]));
    let r = json_file(out.join("report.json"));
    assert_eq!(r["method"], "mlp");
    for k in ["trans", "ind", "prod"] {
        assert_eq!(r[k]["n"], 2, "{k}");
    }

    let out = tmp.path().join("link");
    ok(&simmlp(&["eval", "--protocol", "linkpred", "--data", s(&data), "--method", s(&method), "--out", s(&out)]));
    let auc = json_file(out.join("report.json"))["auc"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let o = simmlp(&[
        "eval",
        "--protocol",
        "linkpred",
        "--data",
        s(&data),
        "--checkpoint",
        s(&method),
        "--out",
        s(&tmp.path().join("x")),
    ]);
    assert_eq!(fails(&o)["error"], "argument");
}

#[test]
fn train_baseline_glnn() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), "planted", 30);
    let cfg = tmp.path().join("glnn.json");
    fs::write(&cfg, r#"{"student": {"epochs": 15, "hidden": 16}, "teacher": {"epochs": 15, "hidden": 16}}"#).unwrap();
    let out = tmp.path().join("glnn");
    let stdout = ok(&simmlp(&[
        "train-baseline",
        "--model",
        "glnn",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]));
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["model"], "mlp");
    assert!((0.0..=1.0).contains(&v["test_acc"].as_f64().unwrap()));
    assert!(out.join("splits.json").exists() && out.join("model.ckpt").exists());
    assert_eq!(json_file(out.join("manifest.json"))["config"]["kd"]["temperature"], 1.0);
}

#[test]
fn sweep_writes_one_row_per_level() {
    let tmp = TempDir::new().unwrap();
    dataset(tmp.path(), "planted", 30);
    let method = tmp.path().join("mlp.json");
    fs::write(&method, r#"{"method": "mlp", "train": {"epochs": 10, "hidden": 16}}"#).unwrap();
    let out = tmp.path().join("sweep");
    let stdout = ok(&simmlp_env(
        &[
            "sweep",
            "--axis",
            "edge",
            "--levels",
            "0,0.5,1",
            "--data",
            "planted",
            "--method",
            s(&method),
            "--threads",
            "2",
            "--out",
            s(&out),
        ],
        Some(tmp.path()),
    ));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4, "{stdout}");
    assert_eq!(lines[0], "level,mean,std,n_seeds");
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap(), stdout);

    let o = simmlp_env(
        &["sweep", "--axis", "edge", "--levels", "0,1", "--data", "planted", "--seeds", "0"],
        Some(tmp.path()),
    );
    assert_eq!(fails(&o)["error"], "argument");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_names_the_fallback() {
    let o = simmlp(&["pretrain", "--data", "no-such-dataset"]);
    let e = fails(&o);
    assert_eq!(e["error"], "argument");
    assert!(e["message"].as_str().unwrap().contains("SIMMLP_DATA_DIR"), "{e}");
}

#[test]
fn bench_synthetic_default() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bench");
    let stdout = ok(&simmlp(&["bench", "--out", s(&out)]));
    assert!(stdout.contains("speedup"), "{stdout}");
    let r = json_file(out.join("latency.json"));
    assert!(r["speedup"].as_f64().unwrap() > 1.0, "{r}");
    assert_eq!(r["workers"], 1);
    assert_eq!(r["precision"], "f32");
    assert_eq!(json_file(out.join("manifest.json"))["command"], "bench");

    let o = simmlp(&["bench", "--reps", "3", "--out", s(&out)]);
    assert_eq!(fails(&o)["error"], "config");
}
