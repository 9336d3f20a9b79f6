//! Central finite-difference oracle for analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Parameters with more coordinates than this are checked on a random
    /// subsample of this size (never below 200).
    pub max_coords: usize,
    /// Denominator floor relative to the loss magnitude:
    /// `|a − n| / max(|a|, |n|, floor · max(1, |L|))`. Central differences
    /// carry roundoff of order `ε|L|/step`, so gradients far below the loss
    /// scale are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            step: 1e-6,
            tolerance: 1e-4,
            max_coords: 2000,
            floor: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// (parameter index, flat coordinate) of the worst entry.
    pub worst: (usize, usize),
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub coords_checked: usize,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn finite_diff_check<T, F>(
    params: &[Tensor<T>],
    analytic: &[Tensor<T>],
    mut loss: F,
    opts: FdOptions,
) -> Result<FdReport>
where
    T: Scalar,
    F: FnMut(&[Tensor<T>]) -> Result<T>,
{
    if params.len() != analytic.len() {
        return Err(Error::State(format!(
            "{} parameters but {} gradients",
            params.len(),
            analytic.len()
        )));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "finite_diff_check",
                left: p.shape(),
                right: g.shape(),
            });
        }
    }
    let first = loss(params)?.as_f64();
    let second = loss(params)?.as_f64();
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let limit = opts.max_coords.max(200);
    let mut work: Vec<Tensor<T>> = params.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        coords_checked: 0,
        passed: true,
    };
    let h = T::of(opts.step);
    let floor = opts.floor * first.abs().max(1.0);
    for (pi, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = if n > limit {
            sample(&mut rng, n, limit).into_vec()
        } else {
            (0..n).collect()
        };
        for c in coords {
            let orig = work[pi].as_slice()[c];
            work[pi].as_mut_slice()[c] = orig + h;
            let up = loss(&work)?.as_f64();
            work[pi].as_mut_slice()[c] = orig - h;
            let down = loss(&work)?.as_f64();
            work[pi].as_mut_slice()[c] = orig;

            let numeric = (up - down) / (2.0 * opts.step);
            let a = grad.as_slice()[c].as_f64();
            let denom = a.abs().max(numeric.abs()).max(floor);
            let rel = (a - numeric).abs() / denom;
            report.coords_checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = (pi, c);
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tolerance;
    Ok(report)
}
