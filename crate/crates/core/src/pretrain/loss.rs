use crate::{Error, Result, Scalar, Tensor};

/// Alignment exponent `γ ≥ 1` and reconstruction weight `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimMlpLoss {
    gamma: f64,
    lambda: f64,
}

impl SimMlpLoss {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be >= 1, got {gamma}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(SimMlpLoss { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Loss value, its two terms and the gradients with respect to each input.
#[derive(Debug, Clone)]
pub struct LossValue<T> {
    pub total: f64,
    pub inv_term: f64,
    pub rec_term: f64,
    pub d_projected: Tensor<T>,
    pub d_h_gnn: Tensor<T>,
    pub d_recon: Tensor<T>,
}

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `Σ_i (‖p_i − g_i‖²)^γ + λ Σ_i ‖r_i − x_i‖²` where `p = ρ(H^MLP)`,
/// `g = H^GNN` and `r = D(H^GNN)`.
pub fn simmlp_loss<T: Scalar>(
    projected: &Tensor<T>,
    h_gnn: &Tensor<T>,
    recon: &Tensor<T>,
    x: &Tensor<T>,
    cfg: &SimMlpLoss,
) -> Result<LossValue<T>> {
    same_shape("simmlp_loss alignment", projected, h_gnn)?;
    same_shape("simmlp_loss reconstruction", recon, x)?;
    if projected.rows() != recon.rows() {
        return Err(Error::Shape {
            op: "simmlp_loss rows",
            left: projected.shape(),
            right: recon.shape(),
        });
    }
    let gamma = cfg.gamma;
    let mut inv = 0.0;
    let mut d_projected = Tensor::zeros(projected.rows(), projected.cols());
    for i in 0..projected.rows() {
        let (p, g) = (projected.row(i), h_gnn.row(i));
        let s: f64 = p.iter().zip(g).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
        inv += s.powf(gamma);
        // d/dp (s^γ) = γ s^(γ-1) · 2(p − g)
        let k = if gamma == 1.0 { 2.0 } else { 2.0 * gamma * s.powf(gamma - 1.0) };
        let k = T::of(k);
        for ((d, &a), &b) in d_projected.row_mut(i).iter_mut().zip(p).zip(g) {
            *d = k * (a - b);
        }
    }
    let d_h_gnn = d_projected.map(|v| -v);

    let mut rec = 0.0;
    let lam = T::of(2.0 * cfg.lambda);
    let mut d_recon = Tensor::zeros(recon.rows(), recon.cols());
    for i in 0..recon.rows() {
        for ((d, &r), &t) in d_recon.row_mut(i).iter_mut().zip(recon.row(i)).zip(x.row(i)) {
            let e = r - t;
            rec += e.as_f64() * e.as_f64();
            *d = lam * e;
        }
    }
    let total = inv + cfg.lambda * rec;
    if !total.is_finite() {
        return Err(Error::NonFinite("simmlp_loss"));
    }
    Ok(LossValue {
        total,
        inv_term: inv,
        rec_term: rec,
        d_projected,
        d_h_gnn,
        d_recon,
    })
}

/// Largest absolute residual of `‖a−b‖² = ‖a−f‖² + ‖b−f‖² − 2⟨a−f, b−f⟩`,
/// taken row by row.
pub fn decomposition_identity_check<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: &Tensor<T>) -> Result<f64> {
    same_shape("decomposition_identity_check", a, b)?;
    same_shape("decomposition_identity_check", a, f)?;
    let mut worst: f64 = 0.0;
    for i in 0..a.rows() {
        let (mut lhs, mut af, mut bf, mut cross) = (0.0, 0.0, 0.0, 0.0);
        for ((&x, &y), &z) in a.row(i).iter().zip(b.row(i)).zip(f.row(i)) {
            let (x, y, z) = (x.as_f64(), y.as_f64(), z.as_f64());
            lhs += (x - y) * (x - y);
            af += (x - z) * (x - z);
            bf += (y - z) * (y - z);
            cross += (x - z) * (y - z);
        }
        worst = worst.max((lhs - (af + bf - 2.0 * cross)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::{Rng as _, SeedableRng};

    fn loss(g: f64, l: f64) -> SimMlpLoss {
        SimMlpLoss::new(g, l).unwrap()
    }

    fn rand_t(n: usize, d: usize, seed: u64) -> Tensor<f64> {
        let mut r = Rng::seed_from_u64(seed);
        Tensor::from_fn(n, d, |_, _| r.random_range(-2.0..2.0))
    }

    #[test]
    fn perfect_alignment_is_zero() {
        let h = rand_t(4, 3, 1);
        let x = rand_t(4, 5, 2);
        let v = simmlp_loss(&h, &h, &x, &x, &loss(1.0, 1.0)).unwrap();
        assert_eq!(v.total, 0.0);
        assert!(v.d_projected.as_slice().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn orthogonal_unit_rows() {
        let p = Tensor::<f64>::from_rows(&[[1.0, 0.0]]).unwrap();
        let g = Tensor::from_rows(&[[0.0, 1.0]]).unwrap();
        let x = Tensor::zeros(1, 1);
        let v = simmlp_loss(&p, &g, &x, &x, &loss(1.0, 0.0)).unwrap();
        assert_eq!(v.total, 2.0);
    }

    #[test]
    fn gamma_two_squares_row_contribution() {
        let p = Tensor::<f64>::from_rows(&[[2.0_f64.sqrt(), 0.0]]).unwrap();
        let g = Tensor::zeros(1, 2);
        let x = Tensor::zeros(1, 1);
        let one = simmlp_loss(&p, &g, &x, &x, &loss(1.0, 0.0)).unwrap();
        let two = simmlp_loss(&p, &g, &x, &x, &loss(2.0, 0.0)).unwrap();
        assert!((one.inv_term - 2.0).abs() < 1e-12);
        assert!((two.inv_term - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_projection_no_reconstruction_is_squared_distance() {
        let a = rand_t(6, 4, 3);
        let b = rand_t(6, 4, 4);
        let x = rand_t(6, 2, 5);
        let v = simmlp_loss(&a, &b, &x, &rand_t(6, 2, 6), &loss(1.0, 0.0)).unwrap();
        let diff = a.sub(&b).unwrap();
        let want: f64 = (0..6).map(|i| diff.row(i).iter().map(|d| d * d).sum::<f64>()).sum();
        assert_eq!(v.total, want);
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(SimMlpLoss::new(0.5, 1.0).is_err());
        assert!(SimMlpLoss::new(1.0, -0.1).is_err());
        assert!(SimMlpLoss::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        use crate::numeric::{finite_diff_check, FdOptions};
        for gamma in [1.0, 1.5, 2.0] {
            let p = rand_t(5, 3, 7);
            let g = rand_t(5, 3, 8);
            let r = rand_t(5, 2, 9);
            let x = rand_t(5, 2, 10);
            let cfg = loss(gamma, 0.7);
            let v = simmlp_loss(&p, &g, &r, &x, &cfg).unwrap();
            let report = finite_diff_check(
                &[p, g, r],
                &[v.d_projected, v.d_h_gnn, v.d_recon],
                |ps| Ok(simmlp_loss(&ps[0], &ps[1], &ps[2], &x, &cfg)?.total),
                FdOptions::default(),
            )
            .unwrap();
            assert!(report.passed, "gamma {gamma}: {report:?}");
        }
    }

    #[test]
    fn decomposition_identity() {
        for seed in 0..20 {
            let a = rand_t(30, 16, seed);
            let b = rand_t(30, 16, seed + 100);
            let f = rand_t(30, 16, seed + 200);
            assert!(decomposition_identity_check(&a, &b, &f).unwrap() < 1e-9);
            assert_eq!(decomposition_identity_check(&a, &b, &b).unwrap(), 0.0);
            assert!(decomposition_identity_check(&a, &b, &Tensor::zeros(30, 16)).unwrap() < 1e-9);
        }
    }
}
