//! Differentiable building blocks with explicit forward caches.
//!
//! Every `forward` returns the output together with whatever the matching
//! `backward` needs, so one layer can be applied to several inputs in the same
//! step (shared encoders, two-view training) without caches clobbering each
//! other. `backward` accumulates parameter gradients and returns the gradient
//! with respect to the layer input.

use rand::Rng;

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Train/eval switch for layers with batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Mutable view of one learnable tensor and its gradient.
pub struct ParamMut<'a, T> {
    pub name: String,
    pub value: &'a mut Tensor<T>,
    pub grad: &'a mut Tensor<T>,
}

/// Anything that owns parameters (and possibly non-learnable buffers).
pub trait Module<T: Scalar> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>);

    /// Every persistent tensor (parameters and buffers), for checkpoints.
    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>);

    fn zero_grad(&mut self) {
        let mut ps = Vec::new();
        self.params_mut("", &mut ps);
        for p in ps {
            p.grad.as_mut_slice().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Snapshot of parameter values in visiting order.
    fn param_values(&mut self) -> Vec<Tensor<T>> {
        let mut ps = Vec::new();
        self.params_mut("", &mut ps);
        ps.into_iter().map(|p| p.value.clone()).collect()
    }

    fn param_grads(&mut self) -> Vec<Tensor<T>> {
        let mut ps = Vec::new();
        self.params_mut("", &mut ps);
        ps.into_iter().map(|p| p.grad.clone()).collect()
    }

    fn set_param_values(&mut self, values: &[Tensor<T>]) -> Result<()> {
        let mut ps = Vec::new();
        self.params_mut("", &mut ps);
        if ps.len() != values.len() {
            return Err(Error::State(format!(
                "expected {} parameter tensors, got {}",
                ps.len(),
                values.len()
            )));
        }
        for (p, v) in ps.into_iter().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::Shape {
                    op: "set_param_values",
                    left: p.value.shape(),
                    right: v.shape(),
                });
            }
            *p.value = v.clone();
        }
        Ok(())
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Fully-connected layer `y = x·W + b`.
#[derive(Debug, Clone)]
pub struct LinearLayer<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub weight_grad: Tensor<T>,
    pub bias_grad: Tensor<T>,
}

impl<T: Scalar> LinearLayer<T> {
    /// Weights uniform in ±sqrt(6/(fan_in+fan_out)), zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(in_dim, out_dim);
        let weight = Tensor::from_fn(in_dim, out_dim, |_, _| T::of(rng.random_range(-bound..=bound)));
        Self::from_parts(weight, Tensor::zeros(1, out_dim))
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        let (i, o) = weight.shape();
        debug_assert_eq!(bias.shape(), (1, o));
        LinearLayer {
            weight_grad: Tensor::zeros(i, o),
            bias_grad: Tensor::zeros(1, o),
            weight,
            bias,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.matmul(&self.weight)?.add_row(&self.bias)
    }

    pub fn backward(&mut self, input: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        self.weight_grad.add_assign(&input.matmul_tn(dy)?)?;
        self.bias_grad.add_assign(&dy.sum_rows())?;
        dy.matmul_nt(&self.weight)
    }

    /// Parameter gradients only, for layers whose input needs no gradient.
    pub fn backward_params(&mut self, input: &Tensor<T>, dy: &Tensor<T>) -> Result<()> {
        self.weight_grad.add_assign(&input.matmul_tn(dy)?)?;
        self.bias_grad.add_assign(&dy.sum_rows())
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Scalar> Module<T> for LinearLayer<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        out.push(ParamMut {
            name: join(prefix, "weight"),
            value: &mut self.weight,
            grad: &mut self.weight_grad,
        });
        out.push(ParamMut {
            name: join(prefix, "bias"),
            value: &mut self.bias,
            grad: &mut self.bias_grad,
        });
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "weight"), &mut self.weight));
        out.push((join(prefix, "bias"), &mut self.bias));
    }
}

/// `max(x,0) + a·min(x,0)` with one learnable slope `a`.
#[derive(Debug, Clone)]
pub struct PRelu<T> {
    /// 1×1 tensor holding the slope.
    pub slope: Tensor<T>,
    pub slope_grad: Tensor<T>,
}

impl<T: Scalar> Default for PRelu<T> {
    fn default() -> Self {
        Self::with_slope(T::of(0.25))
    }
}

impl<T: Scalar> PRelu<T> {
    pub fn with_slope(a: T) -> Self {
        PRelu {
            slope: Tensor::filled(1, 1, a),
            slope_grad: Tensor::zeros(1, 1),
        }
    }

    pub fn slope(&self) -> T {
        self.slope.get(0, 0)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        prelu(x, self.slope())
    }

    pub fn backward(&mut self, input: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let a = self.slope();
        let mut da = T::zero();
        let dx = input.zip_map(dy, "prelu_backward", |x, g| {
            if x > T::zero() {
                g
            } else {
                a * g
            }
        })?;
        for (&x, &g) in input.as_slice().iter().zip(dy.as_slice()) {
            if x <= T::zero() {
                da += g * x;
            }
        }
        let cur = self.slope_grad.get(0, 0);
        self.slope_grad.set(0, 0, cur + da);
        Ok(dx)
    }
}

/// Elementwise parametric ReLU.
pub fn prelu<T: Scalar>(x: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
    if !slope.is_finite() {
        return Err(Error::NonFinite("prelu slope"));
    }
    let out = x.map(|v| v.max(T::zero()) + slope * v.min(T::zero()));
    out.ensure_finite("prelu")?;
    Ok(out)
}

impl<T: Scalar> Module<T> for PRelu<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        out.push(ParamMut {
            name: join(prefix, "slope"),
            value: &mut self.slope,
            grad: &mut self.slope_grad,
        });
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "slope"), &mut self.slope));
    }
}

/// Per-column batch normalization with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
    pub scale_grad: Tensor<T>,
    pub shift_grad: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
}

/// What [`BatchNorm::backward`] needs from a train-mode forward.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            scale: Tensor::filled(1, dim, T::one()),
            shift: Tensor::zeros(1, dim),
            scale_grad: Tensor::zeros(1, dim),
            shift_grad: Tensor::zeros(1, dim),
            running_mean: Tensor::zeros(1, dim),
            running_var: Tensor::filled(1, dim, T::one()),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.cols()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, d) = x.shape();
        if d != self.dim() {
            return Err(Error::Shape {
                op: "batchnorm_forward",
                left: x.shape(),
                right: (1, self.dim()),
            });
        }
        let eps = T::of(self.eps);
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::State(
                        "batchnorm in train mode needs at least two rows".into(),
                    ));
                }
                let nf = T::of(n as f64);
                let mean: Vec<T> = x.sum_rows().as_slice().iter().map(|&s| s / nf).collect();
                let mut var = vec![T::zero(); d];
                for i in 0..n {
                    for (j, v) in var.iter_mut().enumerate() {
                        let c = x.get(i, j) - mean[j];
                        *v += c * c;
                    }
                }
                var.iter_mut().for_each(|v| *v /= nf);
                let m = T::of(self.momentum);
                let unbias = nf / T::of((n - 1) as f64);
                for j in 0..d {
                    let rm = self.running_mean.get(0, j);
                    let rv = self.running_var.get(0, j);
                    self.running_mean.set(0, j, (T::one() - m) * rm + m * mean[j]);
                    self.running_var.set(0, j, (T::one() - m) * rv + m * var[j] * unbias);
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.as_slice().to_vec(),
                self.running_var.as_slice().to_vec(),
            ),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let normalized = Tensor::from_fn(n, d, |i, j| (x.get(i, j) - mean[j]) * inv_std[j]);
        let out = Tensor::from_fn(n, d, |i, j| {
            normalized.get(i, j) * self.scale.get(0, j) + self.shift.get(0, j)
        });
        out.ensure_finite("batchnorm_forward")?;
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
                mode,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BatchNormCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, d) = dy.shape();
        if cache.normalized.shape() != (n, d) {
            return Err(Error::Shape {
                op: "batchnorm_backward",
                left: cache.normalized.shape(),
                right: dy.shape(),
            });
        }
        let xh = &cache.normalized;
        let mut sum_dy = vec![T::zero(); d];
        let mut sum_dy_xh = vec![T::zero(); d];
        for i in 0..n {
            for j in 0..d {
                let g = dy.get(i, j);
                sum_dy[j] += g;
                sum_dy_xh[j] += g * xh.get(i, j);
            }
        }
        for j in 0..d {
            let s = self.scale_grad.get(0, j);
            self.scale_grad.set(0, j, s + sum_dy_xh[j]);
            let b = self.shift_grad.get(0, j);
            self.shift_grad.set(0, j, b + sum_dy[j]);
        }
        let dx = match cache.mode {
            Mode::Train => {
                let nf = T::of(n as f64);
                Tensor::from_fn(n, d, |i, j| {
                    let k = self.scale.get(0, j) * cache.inv_std[j] / nf;
                    k * (nf * dy.get(i, j) - sum_dy[j] - xh.get(i, j) * sum_dy_xh[j])
                })
            }
            Mode::Eval => Tensor::from_fn(n, d, |i, j| {
                dy.get(i, j) * self.scale.get(0, j) * cache.inv_std[j]
            }),
        };
        dx.ensure_finite("batchnorm_backward")?;
        Ok(dx)
    }
}

impl<T: Scalar> Module<T> for BatchNorm<T> {
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        out.push(ParamMut {
            name: join(prefix, "scale"),
            value: &mut self.scale,
            grad: &mut self.scale_grad,
        });
        out.push(ParamMut {
            name: join(prefix, "shift"),
            value: &mut self.shift,
            grad: &mut self.shift_grad,
        });
    }

    fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join(prefix, "scale"), &mut self.scale));
        out.push((join(prefix, "shift"), &mut self.shift));
        out.push((join(prefix, "running_mean"), &mut self.running_mean));
        out.push((join(prefix, "running_var"), &mut self.running_var));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prelu_examples() {
        let x = Tensor::<f64>::from_rows(&[[-4.0, 2.0]]).unwrap();
        assert_eq!(prelu(&x, 0.25).unwrap().as_slice(), &[-1.0, 2.0]);
        assert_eq!(prelu(&x, 0.0).unwrap().as_slice(), &[0.0, 2.0]);
        assert_eq!(prelu(&x, 1.0).unwrap(), x);
        assert!(prelu(&x, f64::NAN).is_err());
    }

    #[test]
    fn batchnorm_two_values() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor::from_rows(&[[1.0], [3.0]]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        let expect = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((y.get(0, 0) + expect).abs() < 1e-15);
        assert!((y.get(1, 0) - expect).abs() < 1e-15);
        // running stats: mean 0.9*0 + 0.1*2, var 0.9*1 + 0.1*2 (unbiased)
        assert!((bn.running_mean.get(0, 0) - 0.2).abs() < 1e-15);
        assert!((bn.running_var.get(0, 0) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_constant_column_is_zero() {
        let mut bn = BatchNorm::<f64>::new(2);
        let x = Tensor::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for i in 0..3 {
            assert_eq!(y.get(i, 0), 0.0);
        }
    }

    #[test]
    fn batchnorm_eval_with_unit_stats_is_identity_up_to_eps() {
        let mut bn = BatchNorm::<f64>::new(3);
        let x = Tensor::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Eval).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-5 * a.abs() + 1e-12);
        }
    }

    #[test]
    fn batchnorm_single_row_train_is_error() {
        let mut bn = BatchNorm::<f64>::new(2);
        let x = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(bn.forward(&x, Mode::Train), Err(Error::State(_))));
        assert!(bn.forward(&x, Mode::Eval).is_ok());
    }

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    }

    #[test]
    fn batchnorm_train_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3, 17, 64] {
            let x = Tensor::<f64>::from_fn(n, 5, |_, j| rng.random_range(-3.0..3.0) * (j + 1) as f64 + j as f64);
            let mut bn = BatchNorm::new(5);
            let (y, _) = bn.forward(&x, Mode::Train).unwrap();
            for j in 0..5 {
                let col = |t: &Tensor<f64>| (0..n).map(|i| t.get(i, j)).collect::<Vec<_>>();
                let (_, raw_var) = moments(&col(&x));
                let (mean, var) = moments(&col(&y));
                assert!(mean.abs() < 1e-10, "mean {mean}");
                // ε in the denominator shrinks the variance to σ²/(σ²+ε)
                assert!((var - raw_var / (raw_var + 1e-5)).abs() < 1e-6, "var {var}");
            }
        }
    }

    #[test]
    fn linear_linear_case_gradient() {
        // loss = sum(x·W): dL/dW = xᵀ·1
        let x = Tensor::<f64>::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let mut lin = LinearLayer::from_parts(Tensor::zeros(2, 3), Tensor::zeros(1, 3));
        let y = lin.forward(&x).unwrap();
        let ones = Tensor::filled(y.rows(), y.cols(), 1.0);
        lin.backward(&x, &ones).unwrap();
        let expected = Tensor::from_fn(2, 3, |i, _| x.get(0, i) + x.get(1, i));
        assert_eq!(lin.weight_grad, expected);
        assert_eq!(lin.bias_grad.as_slice(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn glorot_bound_respected_and_deterministic() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = LinearLayer::<f64>::glorot(30, 20, &mut r1);
        let b = LinearLayer::<f64>::glorot(30, 20, &mut r2);
        assert_eq!(a.weight, b.weight);
        let bound = glorot_bound(30, 20);
        assert!(a.weight.as_slice().iter().all(|w| w.abs() <= bound));
    }
}
