use serde::{Deserialize, Serialize};

use crate::numeric::{cross_entropy, AdamW, ParamMut};
use crate::{Error, Result, Scalar, Tensor};

/// Logistic-regression probe settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    /// L2 penalty `λ_reg ‖W‖²` added to the mean cross-entropy.
    pub l2: f64,
    /// Standardize embedding columns with train-row statistics.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 100,
            lr: 0.01,
            l2: 1e-4,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    /// Predicted class of every embedding row under the best-validation weights.
    pub predictions: Vec<usize>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

fn acc_of(pred: &[usize], rows: &[usize], ys: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().zip(ys).filter(|&(&i, &y)| pred[i] == y).count() as f64 / rows.len() as f64
}

/// Multinomial logistic regression on frozen `embeddings`.
///
/// `labels[i]` is the class of row `i` (unlabeled rows are ignored);
/// `train` fits the weights and `val` picks the epoch whose weights predict.
pub fn linear_probe<T: Scalar>(
    embeddings: &Tensor<T>,
    labels: &[Option<u32>],
    n_classes: usize,
    train: &[usize],
    val: &[usize],
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    let pick = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
        idx.iter().filter_map(|&i| labels[i].map(|y| (i, y as usize))).unzip()
    };
    let (tr, ytr) = pick(train);
    let (va, yva) = pick(val);
    let mut present = ytr.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Eval(format!(
            "linear probe needs at least two classes in the train set, found {}",
            present.len()
        )));
    }

    let (n, d) = embeddings.shape();
    let x: Tensor<f64> = if cfg.standardize {
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for &i in &tr {
            for (j, v) in embeddings.row(i).iter().enumerate() {
                mean[j] += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= tr.len() as f64);
        for &i in &tr {
            for (j, v) in embeddings.row(i).iter().enumerate() {
                var[j] += (v.as_f64() - mean[j]).powi(2);
            }
        }
        let inv: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / tr.len() as f64).sqrt();
                if s > 1e-12 { 1.0 / s } else { 1.0 }
            })
            .collect();
        Tensor::from_fn(n, d, |i, j| (embeddings.get(i, j).as_f64() - mean[j]) * inv[j])
    } else {
        embeddings.cast()
    };

    let xtr = x.gather_rows(&tr);
    let local: Vec<usize> = (0..tr.len()).collect();
    let mut w = Tensor::<f64>::zeros(d, n_classes);
    let mut b = Tensor::<f64>::zeros(1, n_classes);
    let mut opt = AdamW::new(cfg.lr, 0.0);
    let scale = 1.0 / tr.len() as f64;
    let mut best = (f64::NEG_INFINITY, 0usize, w.clone(), b.clone());
    for epoch in 1..=cfg.epochs {
        let logits = xtr.matmul(&w)?.add_row(&b)?;
        let (_, dl) = cross_entropy(&logits, &local, &ytr)?;
        let dl = dl.scale(scale)?;
        let mut gw = xtr.matmul_tn(&dl)?.add(&w.scale(2.0 * cfg.l2)?)?;
        let mut gb = dl.sum_rows();
        opt.step(vec![
            ParamMut {
                name: "probe.weight".into(),
                value: &mut w,
                grad: &mut gw,
            },
            ParamMut {
                name: "probe.bias".into(),
                value: &mut b,
                grad: &mut gb,
            },
        ])?;
        let val_acc = if va.is_empty() {
            0.0
        } else {
            let pred = x.gather_rows(&va).matmul(&w)?.add_row(&b)?.argmax_rows();
            let local_va: Vec<usize> = (0..va.len()).collect();
            acc_of(&pred, &local_va, &yva)
        };
        if val_acc > best.0 {
            best = (val_acc, epoch, w.clone(), b.clone());
        }
    }
    let (best_val_acc, best_epoch, w, b) = best;
    Ok(ProbeResult {
        predictions: x.matmul(&w)?.add_row(&b)?.argmax_rows(),
        best_epoch,
        best_val_acc,
    })
}
