use super::{ParamMut, Scalar, Tensor};
use crate::{Error, Result};

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// First/second moment accumulators, one pair per parameter.
    pub fn moments(&self) -> &[(Tensor<T>, Tensor<T>)] {
        &self.moments
    }

    /// Applies one update. Parameters must arrive in the same order every call.
    pub fn step(&mut self, params: Vec<ParamMut<'_, T>>) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| {
                    let (r, c) = p.value.shape();
                    (Tensor::zeros(r, c), Tensor::zeros(r, c))
                })
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} parameters, got {}",
                self.moments.len(),
                params.len()
            )));
        }
        for (p, (m, _)) in params.iter().zip(&self.moments) {
            if p.grad.shape() != p.value.shape() || m.shape() != p.value.shape() {
                return Err(Error::Shape {
                    op: "adamw_step",
                    left: p.value.shape(),
                    right: p.grad.shape(),
                });
            }
            if !p.grad.is_finite() {
                return Err(Error::NanGradient(p.name.clone()));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let lr = T::of(self.lr);
        let decay = T::one() - T::of(self.lr * self.weight_decay);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let eps = T::of(self.eps);

        for (p, (m, v)) in params.into_iter().zip(self.moments.iter_mut()) {
            let w = p.value.as_mut_slice();
            let g = p.grad.as_slice();
            let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
            for i in 0..w.len() {
                w[i] *= decay;
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                w[i] -= lr * mh / (vh.sqrt() + eps);
            }
            p.value.ensure_finite("adamw_step")?;
        }
        Ok(())
    }
}
