//! One test per acceptance criterion; each prints a single PASS/FAIL line.
//!
//! Criteria that need the public citation graphs read them from
//! `$SIMMLP_DATA_DIR/{cora,citeseer,pubmed}` and fail when they are absent.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng as _, SeedableRng};
use simmlp::baselines::{KdConfig, SupervisedConfig};
use simmlp::bench::{bench_inference, make_synthetic, mlp_inference, time_interleaved, BenchConfig};
use simmlp::eval::{
    auc, auc_brute_force, eval_linkpred, evaluate, linear_probe, mad_smoothness, mincut_score, robustness_sweep,
    Axis, EvalOptions, MadDistance, Method, ProbeConfig,
};
use simmlp::graph::{augment, make_split, normalize, propagate, Graph, MaskMode, Protocol, Scheme};
use simmlp::model::{GcnBaseline, SimMlp};
use simmlp::numeric::{finite_diff_check, FdOptions, Module};
use simmlp::pretrain::{
    decomposition_identity_check, loss_and_backward, pretrain, simmlp_loss, SimMlpLoss, TrainConfig,
};
use simmlp::rng::Rng;
use simmlp::Tensor;

use common::*;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes straight to stdout so the line shows even when output is captured.
fn verdict(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

/// Loads a dataset or records the failure of criterion `n`.
fn dataset_or_fail(n: u32, name: &str) -> Graph<f64> {
    match real_dataset(name) {
        Ok(g) => g,
        Err(why) => {
            verdict(n, false, &why);
            unreachable!()
        }
    }
}

const SEEDS5: [u64; 5] = [0, 1, 2, 3, 4];
const SEEDS3: [u64; 3] = [0, 1, 2];

fn simmlp_method(cfg: TrainConfig) -> Method {
    Method::SimMlp {
        pretrain: cfg,
        probe: ProbeConfig::default(),
    }
}

fn mlp_method() -> Method {
    Method::Mlp {
        train: SupervisedConfig::default(),
    }
}

fn quiet() -> EvalOptions {
    EvalOptions {
        metrics: false,
        ..EvalOptions::default()
    }
}

#[test]
fn criterion_01_gradient_correctness() {
    let _g = serial();
    let t0 = Instant::now();
    let schemes = [Scheme::Bi, Scheme::Row, Scheme::Col];
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let n = 5 + (seed as usize * 7) % 16;
        let g = random_graph(n, 0.3, 4, seed);
        let cfg = TrainConfig {
            hidden: 6,
            gamma: [1.0, 1.5, 2.0][seed as usize % 3],
            lambda: [1.0, 0.5][seed as usize % 2],
            scheme: schemes[seed as usize % 3],
            use_shared_encoder: seed % 4 != 3,
            two_views: seed % 5 == 4,
            gnn_layers: 1 + seed as usize % 3,
            ..TrainConfig::default()
        };
        let view = augment(&g, 0.3, 0.2, MaskMode::Entry, seed).unwrap();
        let second = augment(&g, 0.3, 0.2, MaskMode::Entry, seed + 100).unwrap();
        let adj = normalize(&view.graph, cfg.scheme);
        let x2 = cfg.two_views.then_some(&second.graph.features);
        let mut m = SimMlp::<f64>::new(cfg.dims(4), seed).unwrap();
        loss_and_backward(&mut m, &view.graph.features, x2, &adj, &g.features, &cfg).unwrap();
        let params = m.param_values();
        let grads = m.param_grads();
        let loss_cfg = SimMlpLoss::new(cfg.gamma, cfg.lambda).unwrap();
        let report = finite_diff_check(
            &params,
            &grads,
            |ps| {
                let mut c = m.clone();
                c.set_param_values(ps)?;
                let out = c.forward_train(&view.graph.features, x2, &adj)?;
                Ok(simmlp_loss(&out.projected, &out.h_gnn, &out.recon, &g.features, &loss_cfg)?.total)
            },
            FdOptions::default(),
        )
        .unwrap();
        worst = worst.max(report.max_rel_error);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        worst < 1e-4 && secs < 60.0,
        &format!("max relative error {worst:.2e} over 20 seeds, {secs:.1}s"),
    );
}

#[test]
fn criterion_02_dense_oracle_equivalence() {
    let _g = serial();
    let t0 = Instant::now();
    let mut graphs = vec![random_graph(1, 0.0, 3, 0), random_graph(2, 1.0, 3, 1), random_graph(30, 1.0, 3, 2)];
    // star
    let star: Vec<(u32, u32)> = (1..25u32).map(|j| (0, j)).collect();
    graphs.push(Graph::unlabeled(25, &star, Tensor::from_fn(25, 3, |i, j| (i * 3 + j) as f64 / 7.0 - 5.0)).unwrap());
    for (k, &(n, p)) in [(5, 0.5), (20, 0.2), (50, 0.1), (100, 0.05), (150, 0.03), (200, 0.02), (200, 0.1), (80, 0.0)]
        .iter()
        .enumerate()
    {
        graphs.push(random_graph(n, p, 3, 10 + k as u64));
    }
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (gi, g) in graphs.iter().enumerate() {
        for scheme in [Scheme::Bi, Scheme::Row, Scheme::Col] {
            let dense = dense_adj(g, scheme);
            let adj = normalize(g, scheme);
            for hops in 1..=3 {
                let h = to_dense(&g.features);
                worst = worst.max(max_rel_diff(&propagate(&adj, &g.features, hops).unwrap(), &power_apply(&dense, &h, hops)));

                let dims = simmlp::model::SimMlpDims {
                    in_dim: 3,
                    hidden: 5,
                    mlp_layers: 2,
                    hops,
                    scheme,
                    shared_encoder: gi % 2 == 0,
                };
                let m = SimMlp::<f64>::new(dims, gi as u64).unwrap();
                let enc = m.gnn_encoder.as_ref().unwrap_or(&m.encoder);
                let want = prelu(&power_apply(&dense, &mlp_eval(enc, &h), hops), m.gnn_act.slope());
                worst = worst.max(max_rel_diff(&m.encode_gnn_approx(&adj, &g.features).unwrap(), &want));
                cases += 2;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        2,
        worst <= 1e-12 && secs < 60.0,
        &format!("{cases} comparisons, max deviation {worst:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_03_decomposition_identity() {
    let _g = serial();
    let mut rng = Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, d) = (rng.random_range(1..64), rng.random_range(1..64));
        let scale = 10f64.powi(rng.random_range(-2..3));
        let mut t = || Tensor::<f64>::from_fn(n, d, |_, _| scale * rng.random_range(-1.0..1.0));
        let (a, b, f) = (t(), t(), t());
        worst = worst.max(decomposition_identity_check(&a, &b, &f).unwrap());
    }
    verdict(3, worst < 1e-9, &format!("max residual {worst:.2e} over 50 random draws"));
}

#[test]
fn criterion_04_transductive_accuracy() {
    let _g = serial();
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, floor) in [("cora", 0.78), ("citeseer", 0.68), ("pubmed", 0.81)] {
        let g = match real_dataset(name) {
            Ok(g) => g,
            Err(why) => {
                ok = false;
                lines.push(why);
                continue;
            }
        };
        let cfg = TrainConfig::preset(name).unwrap();
        let rep = evaluate(&simmlp_method(cfg), &g, Protocol::Transductive, &SEEDS5, &quiet()).unwrap();
        let acc = rep.accuracy.unwrap().mean;
        ok &= acc >= floor;
        lines.push(format!("{name} {:.1}% (need {:.1}%)", 100.0 * acc, 100.0 * floor));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 1800.0;
    verdict(4, ok, &format!("{}; {secs:.0}s", lines.join("; ")));
}

#[test]
fn criterion_05_coldstart_ordering() {
    let _g = serial();
    let g = dataset_or_fail(5, "cora");
    let mean = |m: &Method| evaluate(m, &g, Protocol::Coldstart, &SEEDS5, &quiet()).unwrap().ind.unwrap().mean;
    let sim = mean(&simmlp_method(TrainConfig::cora()));
    let mlp = mean(&mlp_method());
    let gcn = mean(&Method::Gcn {
        train: SupervisedConfig::default(),
    });
    verdict(
        5,
        sim - mlp >= 0.05 && sim > gcn,
        &format!("cold-start SimMLP {:.1}%, MLP {:.1}%, GCN {:.1}%", 100.0 * sim, 100.0 * mlp, 100.0 * gcn),
    );
}

#[test]
fn criterion_06_distillation_ordering() {
    let _g = serial();
    let g = dataset_or_fail(6, "cora");
    let mean = |m: &Method| evaluate(m, &g, Protocol::Transductive, &SEEDS5, &quiet()).unwrap().accuracy.unwrap().mean;
    let glnn = mean(&Method::Glnn {
        student: SupervisedConfig::default(),
        teacher: SupervisedConfig::default(),
        kd: KdConfig::default(),
    });
    let mlp = mean(&mlp_method());
    verdict(
        6,
        glnn - mlp >= 0.05,
        &format!("transductive GLNN {:.1}%, MLP {:.1}%", 100.0 * glnn, 100.0 * mlp),
    );
}

#[test]
fn criterion_07_collapse_without_structure() {
    let _g = serial();
    let g = dataset_or_fail(7, "cora");
    let arm = |cfg: &TrainConfig| {
        let (mut std, mut acc) = (0.0, 0.0);
        for &s in &SEEDS3 {
            let cfg = TrainConfig { seed: s, ..cfg.clone() };
            let p = pretrain(&g, &cfg).unwrap();
            std += p.monitor.last().unwrap().emb_std;
            let split = make_split(&g, Protocol::Transductive, simmlp::rng::stream_seed(s, "split")).unwrap();
            let emb = p.model.encode_mlp(&g.features).unwrap();
            let r = linear_probe(&emb, &g.labels, g.n_classes, &split.train, &split.val, &ProbeConfig::default()).unwrap();
            acc += simmlp::eval::accuracy(&r.predictions, &split.test, &g);
        }
        (std / 3.0, acc / 3.0)
    };
    let full = arm(&TrainConfig::cora());
    let ablated = arm(&TrainConfig {
        use_shared_encoder: false,
        use_augmentation: false,
        ..TrainConfig::cora()
    });
    verdict(
        7,
        ablated.0 < 0.2 * full.0 && full.1 - ablated.1 >= 0.10,
        &format!(
            "emb std {:.4} vs {:.4}, probe {:.1}% vs {:.1}%",
            ablated.0,
            full.0,
            100.0 * ablated.1,
            100.0 * full.1
        ),
    );
}

#[test]
fn criterion_08_structure_metrics() {
    let _g = serial();
    // unit cases first: they hold independently of any dataset
    let two = random_graph(2, 1.0, 1, 0);
    let same = Tensor::<f64>::from_rows(&[[0.3, -1.2], [0.3, -1.2]]).unwrap();
    let mad0 = mad_smoothness(&same, &two, MadDistance::Cosine).unwrap();
    let cliques: Vec<(u32, u32)> = [0u32, 4]
        .iter()
        .flat_map(|&b| (0..4u32).flat_map(move |i| (i + 1..4).map(move |j| (b + i, b + j))))
        .collect();
    let cg = Graph::<f64>::unlabeled(8, &cliques, Tensor::zeros(8, 1)).unwrap();
    let cut1 = mincut_score(&[0, 0, 0, 0, 1, 1, 1, 1], &cg).unwrap();
    let units = mad0 == 0.0 && cut1 == 1.0;

    let g = match real_dataset("cora") {
        Ok(g) => g,
        Err(why) => {
            verdict(8, false, &format!("unit values exact: {units}; {why}"));
            return;
        }
    };
    let run = |m: &Method| evaluate(m, &g, Protocol::Transductive, &SEEDS5, &EvalOptions::default()).unwrap();
    let sim = run(&simmlp_method(TrainConfig::cora()));
    let mlp = run(&mlp_method());
    let (ms, mm) = (sim.mad.unwrap().mean, mlp.mad.unwrap().mean);
    let (cs, cm) = (sim.mincut.unwrap().mean, mlp.mincut.unwrap().mean);
    verdict(
        8,
        units && ms < mm && cs > cm,
        &format!("unit values exact: {units}; MAD {ms:.3} vs {mm:.3}; MinCut {cs:.3} vs {cm:.3}"),
    );
}

#[test]
fn criterion_09_robustness_orderings() {
    let _g = serial();
    let g = dataset_or_fail(9, "cora");
    let sim = simmlp_method(TrainConfig::cora());
    let mlp = mlp_method();

    let edge = robustness_sweep(&mlp, &g, Axis::Edge, &[0.0, 0.1, 0.5, 1.0], &SEEDS3, 1).unwrap();
    let edge_ok = edge.iter().all(|p| p.values == edge[0].values);

    let noise = robustness_sweep(&sim, &g, Axis::Feature, &[1.0], &SEEDS3, 1).unwrap();
    let mut counts = vec![0usize; g.n_classes];
    g.labels.iter().flatten().for_each(|&y| counts[y as usize] += 1);
    let majority = *counts.iter().max().unwrap() as f64 / counts.iter().sum::<usize>() as f64;
    let n_ind = (g.n_nodes() as f64 * 0.2).ceil();
    let sigma = (majority * (1.0 - majority) / n_ind).sqrt();
    let noise_ok = noise[0].mean <= majority + 3.0 * sigma;

    let levels = [0.01, 0.05, 0.1, 0.5, 1.0];
    let ls = robustness_sweep(&sim, &g, Axis::Label, &levels, &SEEDS3, 1).unwrap();
    let lm = robustness_sweep(&mlp, &g, Axis::Label, &levels, &SEEDS3, 1).unwrap();
    let label_ok = ls.iter().zip(&lm).all(|(a, b)| a.mean >= b.mean);
    let curve: Vec<String> = ls
        .iter()
        .zip(&lm)
        .map(|(a, b)| format!("{}: {:.1}/{:.1}", a.level, 100.0 * a.mean, 100.0 * b.mean))
        .collect();
    verdict(
        9,
        edge_ok && noise_ok && label_ok,
        &format!(
            "MLP edge-invariant: {edge_ok}; SimMLP at alpha=1 {:.1}% vs majority {:.1}%; labels SimMLP/MLP [{}]",
            100.0 * noise[0].mean,
            100.0 * majority,
            curve.join(", ")
        ),
    );
}

#[test]
fn criterion_10_latency() {
    let _g = serial();
    let t0 = Instant::now();
    let (n, d, hidden) = (100_000, 512, 512);
    let dims = simmlp::model::SimMlpDims {
        in_dim: d,
        hidden,
        mlp_layers: 2,
        hops: 2,
        scheme: Scheme::Bi,
        shared_encoder: true,
    };
    let mlp = SimMlp::<f32>::new(dims, 0).unwrap();
    let gcn = GcnBaseline::<f32>::new(&[d, hidden, hidden], 0).unwrap();
    let mut rng = Rng::seed_from_u64(10);
    let targets: Vec<usize> = (0..1000).map(|_| rng.random_range(0..n)).collect();
    let cfg = BenchConfig {
        reps: 50,
        ..BenchConfig::default()
    };

    let g = make_synthetic::<f32>(n, 20.0, d, 1);
    let base = bench_inference(&mlp, &gcn, &g, &targets, &cfg).unwrap();
    // same model and targets on a graph with twice the edges, timed in
    // alternation with the original so both see the same machine state
    let g2 = make_synthetic::<f32>(n, 40.0, d, 2);
    let mlp_t = time_interleaved(
        &cfg,
        &mut [
            &mut || mlp_inference(&mlp, &g, &targets, 1),
            &mut || mlp_inference(&mlp, &g2, &targets, 1),
        ],
    )
    .unwrap();
    let drift = (mlp_t[1].median_ms - mlp_t[0].median_ms).abs() / mlp_t[0].median_ms;
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        10,
        base.speedup >= 5.0 && drift < 0.10 && secs < 300.0,
        &format!(
            "MLP {:.2} ms, GCN {:.2} ms, speedup {:.1}x; MLP drift at 2x edges {:.1}%; {secs:.0}s",
            base.mlp.median_ms,
            base.gnn.median_ms,
            base.speedup,
            100.0 * drift
        ),
    );
}

#[test]
fn criterion_11_link_prediction() {
    let _g = serial();
    let mut rng = Rng::seed_from_u64(11);
    let mut exact = true;
    for _ in 0..20 {
        let (np, nn) = (rng.random_range(1..100), rng.random_range(1..100));
        let pos: Vec<f64> = (0..np).map(|_| rng.random_range(0..8) as f64).collect();
        let neg: Vec<f64> = (0..nn).map(|_| rng.random_range(0..8) as f64).collect();
        exact &= auc(&pos, &neg).unwrap() == auc_brute_force(&pos, &neg).unwrap();
    }
    let g = match real_dataset("cora") {
        Ok(g) => g,
        Err(why) => {
            verdict(11, false, &format!("rank statistic exact: {exact}; {why}"));
            return;
        }
    };
    let mean = |m: &Method| SEEDS5.iter().map(|&s| eval_linkpred(m, &g, s).unwrap().test_auc).sum::<f64>() / 5.0;
    let sim = mean(&simmlp_method(TrainConfig::cora()));
    let mlp = mean(&mlp_method());
    verdict(
        11,
        exact && sim > mlp,
        &format!("rank statistic exact: {exact}; AUC SimMLP {sim:.3} vs MLP {mlp:.3}"),
    );
}
