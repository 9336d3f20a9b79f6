use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::rng::Rng;
use crate::{Error, Result, Scalar};

/// Granularity of feature masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Whole feature dimensions are zeroed.
    #[default]
    Column,
    /// Individual entries are zeroed.
    Entry,
}

/// One randomly corrupted copy of a graph.
#[derive(Debug, Clone)]
pub struct AugmentedView<T> {
    pub graph: Graph<T>,
    pub feature_mask_ratio: f64,
    pub edge_mask_ratio: f64,
    pub mode: MaskMode,
    pub seed: u64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Feature masking with ratio `p_f` and undirected edge dropping with ratio `p_e`.
pub fn augment<T: Scalar>(
    g: &Graph<T>,
    p_f: f64,
    p_e: f64,
    mode: MaskMode,
    seed: u64,
) -> Result<AugmentedView<T>> {
    check_prob("feature mask ratio", p_f)?;
    check_prob("edge mask ratio", p_e)?;
    let mut rng = Rng::seed_from_u64(seed);

    let mut x = g.features.clone();
    let d = x.cols();
    match mode {
        MaskMode::Column => {
            let masked: Vec<bool> = (0..d).map(|_| rng.random::<f64>() < p_f).collect();
            for i in 0..x.rows() {
                for (v, &m) in x.row_mut(i).iter_mut().zip(&masked) {
                    if m {
                        *v = T::zero();
                    }
                }
            }
        }
        MaskMode::Entry => {
            for v in x.as_mut_slice() {
                if rng.random::<f64>() < p_f {
                    *v = T::zero();
                }
            }
        }
    }

    let kept: Vec<(u32, u32)> = g
        .undirected_edges()
        .filter(|_| rng.random::<f64>() >= p_e)
        .collect();
    let mut graph = g.with_undirected_edges(&kept)?;
    graph.features = x;
    Ok(AugmentedView {
        graph,
        feature_mask_ratio: p_f,
        edge_mask_ratio: p_e,
        mode,
        seed,
    })
}

/// `X̃ = (1 − α)X + α·ε` with `ε` i.i.d. standard normal.
pub fn inject_feature_noise<T: Scalar>(g: &Graph<T>, alpha: f64, seed: u64) -> Result<Graph<T>> {
    check_prob("feature noise level", alpha)?;
    if alpha == 0.0 {
        return Ok(g.clone());
    }
    let mut rng = Rng::seed_from_u64(seed);
    let keep = T::of(1.0 - alpha);
    let a = T::of(alpha);
    let x = g.features.map(|v| {
        let eps: f64 = StandardNormal.sample(&mut rng);
        keep * v + a * T::of(eps)
    });
    g.with_features(x)
}

/// Default bound on `n(n−1)/2` for edge flipping.
pub const DEFAULT_PAIR_CAP: u64 = 100_000_000;

/// Flips every unordered node pair independently with probability `p`.
pub fn inject_edge_noise<T: Scalar>(g: &Graph<T>, p: f64, seed: u64, pair_cap: u64) -> Result<Graph<T>> {
    check_prob("edge flip probability", p)?;
    let n = g.n_nodes() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs > pair_cap {
        return Err(Error::Config(format!(
            "edge flipping over {pairs} node pairs exceeds the cap of {pair_cap}"
        )));
    }
    if p == 0.0 {
        return Ok(g.clone());
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..g.n_nodes() {
        let nb = g.neighbors(i);
        let mut k = nb.partition_point(|&j| (j as usize) <= i);
        for j in i + 1..g.n_nodes() {
            let present = k < nb.len() && nb[k] as usize == j;
            if present {
                k += 1;
            }
            let flip = rng.random::<f64>() < p;
            if present != flip {
                out.push((i as u32, j as u32));
            }
        }
    }
    g.with_undirected_edges(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic::make_synthetic;
    use crate::Tensor;

    #[test]
    fn zero_ratios_identity() {
        let g = make_synthetic::<f64>(50, 6.0, 8, 1);
        let v = augment(&g, 0.0, 0.0, MaskMode::Column, 9).unwrap();
        assert_eq!(v.graph, g);
    }

    #[test]
    fn full_feature_mask_zeroes_everything() {
        let g = make_synthetic::<f64>(30, 4.0, 5, 2);
        for mode in [MaskMode::Column, MaskMode::Entry] {
            let v = augment(&g, 1.0, 0.0, mode, 3).unwrap();
            assert!(v.graph.features.as_slice().iter().all(|&x| x == 0.0));
        }
        let v = augment(&g, 0.0, 1.0, MaskMode::Column, 3).unwrap();
        assert_eq!(v.graph.n_edges(), 0);
    }

    #[test]
    fn column_mode_masks_whole_columns() {
        let g = make_synthetic::<f64>(40, 4.0, 30, 4);
        let v = augment(&g, 0.5, 0.0, MaskMode::Column, 5).unwrap();
        for j in 0..30 {
            let zeros = (0..40).filter(|&i| v.graph.features.get(i, j) == 0.0).count();
            assert!(zeros == 0 || zeros == 40, "column {j} partially masked");
        }
    }

    #[test]
    fn half_edge_drop_binomial() {
        // ER graph with ~1000 edges; retained count ~ Binomial(m, 0.5)
        let g = make_synthetic::<f64>(1000, 2.0, 1, 6);
        let m = g.n_edges() as f64;
        let v = augment(&g, 0.0, 0.5, MaskMode::Column, 7).unwrap();
        let sigma = (m * 0.25).sqrt();
        assert!((v.graph.n_edges() as f64 - m / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn equal_seeds_equal_views() {
        let g = make_synthetic::<f64>(80, 5.0, 6, 8);
        let a = augment(&g, 0.3, 0.4, MaskMode::Entry, 11).unwrap();
        let b = augment(&g, 0.3, 0.4, MaskMode::Entry, 11).unwrap();
        assert_eq!(a.graph, b.graph);
        assert!(augment(&g, 1.5, 0.0, MaskMode::Entry, 1).is_err());
    }

    #[test]
    fn feature_noise_levels() {
        let g = make_synthetic::<f64>(100, 3.0, 100, 9);
        assert_eq!(inject_feature_noise(&g, 0.0, 1).unwrap(), g);

        let half = inject_feature_noise(&g, 0.5, 4).unwrap();
        let mut rng = Rng::seed_from_u64(4);
        for (a, b) in g.features.as_slice().iter().zip(half.features.as_slice()) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            assert_eq!(*b, 0.5 * a + 0.5 * eps);
        }

        let full = inject_feature_noise(&g, 1.0, 2).unwrap();
        let (x, y) = (g.features.as_slice(), full.features.as_slice());
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        assert!((cov / (vx * vy).sqrt()).abs() < 0.05);
    }

    #[test]
    fn edge_flip_cases() {
        let g = make_synthetic::<f64>(30, 4.0, 2, 10);
        assert_eq!(inject_edge_noise(&g, 0.0, 1, DEFAULT_PAIR_CAP).unwrap(), g);
        let comp = inject_edge_noise(&g, 1.0, 1, DEFAULT_PAIR_CAP).unwrap();
        comp.validate().unwrap();
        assert_eq!(comp.n_edges(), 30 * 29 / 2 - g.n_edges());
        for i in 0..30 {
            for j in 0..30 {
                if i != j {
                    assert_ne!(g.has_edge(i, j), comp.has_edge(i, j));
                }
            }
        }
        assert_eq!(inject_edge_noise(&comp, 1.0, 5, DEFAULT_PAIR_CAP).unwrap(), g);
    }

    #[test]
    fn edge_flip_binomial_on_empty() {
        let g = Graph::<f64>::unlabeled(50, &[], Tensor::zeros(50, 1)).unwrap();
        let out = inject_edge_noise(&g, 0.1, 3, DEFAULT_PAIR_CAP).unwrap();
        let sigma = (1225.0f64 * 0.1 * 0.9).sqrt();
        assert!((out.n_edges() as f64 - 122.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn edge_flip_cap() {
        let g = Graph::<f64>::unlabeled(100, &[], Tensor::zeros(100, 1)).unwrap();
        assert!(inject_edge_noise(&g, 0.1, 3, 1000).is_err());
    }
}
