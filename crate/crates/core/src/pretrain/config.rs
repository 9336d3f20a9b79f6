use serde::{Deserialize, Serialize};

use crate::graph::{MaskMode, Scheme};
use crate::model::SimMlpDims;
use crate::{Error, Result};

/// Every knob of self-supervised pretraining. Missing keys take the
/// defaults below when deserialized; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub mlp_layers: usize,
    /// Propagation hops of the GNN approximation.
    pub gnn_layers: usize,
    /// Feature mask ratio.
    pub p_f: f64,
    /// Edge mask ratio.
    pub p_e: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub mask_mode: MaskMode,
    pub use_augmentation: bool,
    pub use_shared_encoder: bool,
    pub use_reconstruction: bool,
    /// Detach `H^GNN` in the alignment term.
    pub stop_gradient: bool,
    /// Feed the GNN branch an independently augmented second view.
    pub two_views: bool,
    /// Linear-probe accuracy is recorded every this many epochs (0 = never).
    pub probe_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 1e-3,
            weight_decay: 0.0,
            hidden: 512,
            mlp_layers: 2,
            gnn_layers: 2,
            p_f: 0.5,
            p_e: 0.25,
            gamma: 1.0,
            lambda: 1.0,
            seed: 0,
            scheme: Scheme::Bi,
            mask_mode: MaskMode::Column,
            use_augmentation: true,
            use_shared_encoder: true,
            use_reconstruction: true,
            stop_gradient: false,
            two_views: false,
            probe_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn cora() -> Self {
        TrainConfig::default()
    }

    pub fn citeseer() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 5e-5,
            gnn_layers: 3,
            p_f: 0.75,
            p_e: 0.5,
            ..TrainConfig::default()
        }
    }

    pub fn pubmed() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 1e-5,
            gnn_layers: 3,
            p_f: 0.25,
            p_e: 0.25,
            ..TrainConfig::default()
        }
    }

    /// Published per-dataset settings by (case-insensitive) dataset name.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cora" => Some(Self::cora()),
            "citeseer" => Some(Self::citeseer()),
            "pubmed" => Some(Self::pubmed()),
            _ => None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.gamma < 1.0 || !self.gamma.is_finite() {
            return bad(format!("gamma must be >= 1, got {}", self.gamma));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        for (k, p) in [("p_f", self.p_f), ("p_e", self.p_e)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{k} must lie in [0, 1], got {p}"));
            }
        }
        if self.lr <= 0.0 || self.weight_decay < 0.0 {
            return bad(format!("lr {} / weight_decay {} out of range", self.lr, self.weight_decay));
        }
        if self.hidden == 0 || self.mlp_layers == 0 || self.gnn_layers == 0 {
            return bad("hidden, mlp_layers and gnn_layers must be positive".into());
        }
        Ok(())
    }

    pub fn dims(&self, in_dim: usize) -> SimMlpDims {
        SimMlpDims {
            in_dim,
            hidden: self.hidden,
            mlp_layers: self.mlp_layers,
            hops: self.gnn_layers,
            scheme: self.scheme,
            shared_encoder: self.use_shared_encoder,
        }
    }
}
