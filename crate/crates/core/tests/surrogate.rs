//! Method orderings on a small homophilous planted-partition graph. These
//! run without external data; only orderings that hold across feature
//! regimes of the generator are asserted.

use simmlp::baselines::{KdConfig, SupervisedConfig};
use simmlp::eval::{evaluate, robustness_sweep, Axis, EvalOptions, Method, ProbeConfig};
use simmlp::graph::synthetic::PlantedPartition;
use simmlp::graph::{Graph, Protocol};
use simmlp::pretrain::TrainConfig;

const SEEDS: [u64; 2] = [0, 1];

fn surrogate() -> Graph<f64> {
    PlantedPartition {
        n_nodes: 400,
        n_classes: 4,
        n_features: 150,
        avg_degree: 4.0,
        homophily: 0.8,
        words_per_node: 10,
        signal: 0.45,
    }
    .generate(3)
}

fn simmlp() -> Method {
    Method::SimMlp {
        pretrain: TrainConfig {
            epochs: 200,
            hidden: 128,
            ..TrainConfig::default()
        },
        probe: ProbeConfig::default(),
    }
}

fn mlp() -> Method {
    Method::Mlp {
        train: SupervisedConfig::default(),
    }
}

#[test]
fn alignment_smooths_embeddings_over_edges() {
    let g = surrogate();
    let mad = |m: &Method| {
        evaluate(m, &g, Protocol::Transductive, &SEEDS, &EvalOptions::default())
            .unwrap()
            .mad
            .unwrap()
            .mean
    };
    let (sim, sup) = (mad(&simmlp()), mad(&mlp()));
    assert!(sim < sup, "MAD SimMLP {sim:.3} vs MLP {sup:.3}");
}

#[test]
fn distillation_beats_plain_mlp() {
    let g = surrogate();
    let opts = EvalOptions {
        metrics: false,
        ..EvalOptions::default()
    };
    let acc = |m: &Method| {
        evaluate(m, &g, Protocol::Transductive, &SEEDS, &opts)
            .unwrap()
            .accuracy
            .unwrap()
            .mean
    };
    let glnn = acc(&Method::Glnn {
        student: SupervisedConfig::default(),
        teacher: SupervisedConfig::default(),
        kd: KdConfig::default(),
    });
    let sup = acc(&mlp());
    assert!(glnn >= sup + 0.05, "GLNN {glnn:.3} vs MLP {sup:.3}");
}

#[test]
fn pure_noise_features_drop_to_chance() {
    let g = surrogate();
    let curve = robustness_sweep(&simmlp(), &g, Axis::Feature, &[0.0, 1.0], &SEEDS, 1).unwrap();
    let mut counts = vec![0usize; g.n_classes];
    g.labels.iter().flatten().for_each(|&y| counts[y as usize] += 1);
    let majority = *counts.iter().max().unwrap() as f64 / g.n_nodes() as f64;
    let n_ind = (g.n_nodes() as f64 * 0.2).ceil();
    let sigma = (majority * (1.0 - majority) / n_ind).sqrt();
    assert!(curve[1].mean <= majority + 3.0 * sigma, "{curve:?} majority {majority}");
    assert!(curve[0].mean > curve[1].mean + 0.1, "{curve:?}");
}
