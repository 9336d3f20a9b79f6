//! Classification losses with their gradients.

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Row-wise softmax computed in `f64`.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>, temperature: f64) -> Vec<Vec<f64>> {
    (0..logits.rows())
        .map(|i| {
            let r: Vec<f64> = logits.row(i).iter().map(|v| v.as_f64() / temperature).collect();
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// `Σ_{i∈rows} −log softmax(logits_i)[y_i]` and its gradient (zero outside `rows`).
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, rows: &[usize], labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    if rows.len() != labels.len() {
        return Err(Error::State(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let c = logits.cols();
    let mut grad = Tensor::zeros(logits.rows(), c);
    let mut loss = 0.0;
    for (&i, &y) in rows.iter().zip(labels) {
        if y >= c {
            return Err(Error::Config(format!("label {y} out of range for {c} classes")));
        }
        let r: Vec<f64> = logits.row(i).iter().map(|v| v.as_f64()).collect();
        let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + r.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - r[y];
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (r[j] - lse).exp();
            *g = T::of(if j == y { p - 1.0 } else { p });
        }
    }
    Ok((loss, grad))
}

/// `Σ_{i∈rows} KL(softmax(t_i/τ) ‖ softmax(s_i/τ))` and its gradient with
/// respect to the student logits `s`.
pub fn kl_distill<T: Scalar>(
    student: &Tensor<T>,
    teacher: &Tensor<T>,
    temperature: f64,
    rows: &[usize],
) -> Result<(f64, Tensor<T>)> {
    if student.shape() != teacher.shape() {
        return Err(Error::Shape {
            op: "kl_distill",
            left: student.shape(),
            right: teacher.shape(),
        });
    }
    let ps = softmax_rows(&student.gather_rows(rows), temperature);
    let pt = softmax_rows(&teacher.gather_rows(rows), temperature);
    let mut grad = Tensor::zeros(student.rows(), student.cols());
    let mut loss = 0.0;
    for (k, &i) in rows.iter().enumerate() {
        for j in 0..student.cols() {
            let (s, t) = (ps[k][j], pt[k][j]);
            if t > 0.0 {
                loss += t * (t.ln() - s.max(f64::MIN_POSITIVE).ln());
            }
            grad.set(i, j, T::of((s - t) / temperature));
        }
    }
    Ok((loss.max(0.0), grad))
}
